#include "rtp/util.hpp"

#include <atomic>
#include <cstdio>
#include <exception>
#include <mutex>

#include "rtp/error.hpp"

namespace rtp {

std::size_t checked_power(std::size_t base, std::size_t exp, std::size_t cap) {
  std::size_t result = 1;
  for (std::size_t i = 0; i < exp; ++i) {
    if (base != 0 && result > cap / base)
      throw Error(ErrorKind::ArityOverflow, std::to_string(base) + "^" + std::to_string(exp) +
                                                " exceeds enumeration cap " + std::to_string(cap));
    result *= base;
  }
  if (result > cap)
    throw Error(ErrorKind::ArityOverflow, std::to_string(base) + "^" + std::to_string(exp) +
                                              " exceeds enumeration cap " + std::to_string(cap));
  return result;
}

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

unsigned default_threads() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::min<std::size_t>(count, 1024))));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    try {
      for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) body(i);
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next.store(count);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace rtp
