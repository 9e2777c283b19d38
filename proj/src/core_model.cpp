#include "rtp/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <numeric>
#include <sstream>

#include "rtp/error.hpp"
#include "rtp/util.hpp"

namespace rtp {

// ---------------------------------------------------------------------------
// StateSpace

StateSpace::StateSpace(std::size_t size) : size_(size) {
  if (size == 0) throw Error(ErrorKind::InvalidArgument, "state space must be non-empty");
}

StateSpace StateSpace::binary() { return chain(2); }

StateSpace StateSpace::chain(std::size_t n) {
  std::vector<std::pair<State, State>> rel;
  for (State a = 0; a + 1 < n; ++a) rel.emplace_back(a, a + 1);
  return StateSpace(n).with_order(rel);
}

StateSpace StateSpace::with_order(std::span<const std::pair<State, State>> relations) const {
  StateSpace out(size_);
  const std::size_t n = size_;
  out.order_.assign(n * n, 0);
  for (std::size_t a = 0; a < n; ++a) out.order_[a * n + a] = 1;
  for (const auto& [a, b] : relations) {
    if (a >= n || b >= n) throw Error(ErrorKind::InvalidArgument, "order relation outside state space");
    out.order_[a * n + b] = 1;
  }
  // Warshall closure.
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      if (out.order_[i * n + k])
        for (std::size_t j = 0; j < n; ++j)
          if (out.order_[k * n + j]) out.order_[i * n + j] = 1;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && out.order_[i * n + j] && out.order_[j * n + i])
        throw Error(ErrorKind::InvalidArgument, "order relation is not antisymmetric");
  return out;
}

bool StateSpace::leq(State a, State b) const {
  if (!has_order()) return a == b;
  return order_[a * size_ + b] != 0;
}

bool StateSpace::has_bounds() const {
  if (!has_order()) return false;
  const auto top = static_cast<State>(size_ - 1);
  for (State s = 0; s < size_; ++s)
    if (!leq(0, s) || !leq(s, top)) return false;
  return true;
}

// ---------------------------------------------------------------------------
// LocalMap

LocalMap::LocalMap(std::string name, std::size_t n_states, std::size_t arity,
                   std::vector<State> table)
    : name_(std::move(name)), n_states_(n_states), arity_(arity), table_(std::move(table)) {
  if (n_states == 0) throw Error(ErrorKind::InvalidArgument, "map over empty state space");
  const std::size_t expected = checked_power(n_states, arity, kMaxTableSize);
  if (table_.size() != expected)
    throw Error(ErrorKind::InvalidArgument, "map '" + name_ + "' table has " +
                                                std::to_string(table_.size()) + " entries, expected " +
                                                std::to_string(expected));
  for (State s : table_)
    if (s >= n_states) throw Error(ErrorKind::InvalidArgument, "map '" + name_ + "' outputs an invalid state");
}

LocalMap LocalMap::from_function(std::string name, std::size_t n_states, std::size_t arity,
                                 const std::function<State(std::span<const State>)>& fn) {
  const std::size_t count = checked_power(n_states, arity, kMaxTableSize);
  std::vector<State> table(count);
  std::vector<State> x(arity, 0);
  for (std::size_t code = 0; code < count; ++code) {
    table[code] = fn(x);
    // increment the lexicographic counter
    for (std::size_t i = arity; i-- > 0;) {
      if (++x[i] < n_states) break;
      x[i] = 0;
    }
  }
  return LocalMap(std::move(name), n_states, arity, std::move(table));
}

std::size_t LocalMap::encode(std::span<const State> x) const {
  std::size_t code = 0;
  for (State s : x) code = code * n_states_ + s;
  return code;
}

void LocalMap::decode(std::size_t code, std::span<State> out) const {
  for (std::size_t i = arity_; i-- > 0;) {
    out[i] = static_cast<State>(code % n_states_);
    code /= n_states_;
  }
}

bool LocalMap::is_identity() const {
  if (arity_ != 1) return false;
  for (std::size_t s = 0; s < n_states_; ++s)
    if (table_[s] != s) return false;
  return true;
}

bool LocalMap::depends_on(std::size_t coordinate) const {
  if (coordinate >= arity_) return false;
  const std::size_t stride = checked_power(n_states_, arity_ - 1 - coordinate, kMaxTableSize);
  for (std::size_t code = 0; code < table_.size(); ++code) {
    const std::size_t digit = (code / stride) % n_states_;
    if (digit != 0) continue;
    for (std::size_t v = 1; v < n_states_; ++v)
      if (table_[code + v * stride] != table_[code]) return true;
  }
  return false;
}

bool LocalMap::is_monotone(const StateSpace& space) const {
  if (!space.has_order() || space.size() != n_states_) return false;
  std::vector<State> x(arity_);
  std::vector<std::size_t> strides(arity_);
  for (std::size_t i = 0; i < arity_; ++i)
    strides[i] = checked_power(n_states_, arity_ - 1 - i, kMaxTableSize);
  for (std::size_t code = 0; code < table_.size(); ++code) {
    decode(code, x);
    for (std::size_t i = 0; i < arity_; ++i) {
      for (State v = 0; v < n_states_; ++v) {
        if (v == x[i] || !space.leq(x[i], v)) continue;
        const std::size_t up = code + (v - x[i]) * strides[i];
        if (!space.leq(table_[code], table_[up])) return false;
      }
    }
  }
  return true;
}

LocalMap LocalMap::restrict_to(std::span<const std::size_t> coordinates) const {
  for (std::size_t i = 0; i < arity_; ++i) {
    if (std::find(coordinates.begin(), coordinates.end(), i) == coordinates.end() && depends_on(i))
      throw Error(ErrorKind::InvalidArgument,
                  "map '" + name_ + "' depends on coordinate " + std::to_string(i + 1) +
                      " outside its declared set");
  }
  std::vector<State> full(arity_, 0);
  return from_function(name_, n_states_, coordinates.size(), [&](std::span<const State> x) {
    std::fill(full.begin(), full.end(), 0);
    for (std::size_t j = 0; j < coordinates.size(); ++j) full[coordinates[j]] = x[j];
    return (*this)(full);
  });
}

namespace maps {

LocalMap cob() {
  return LocalMap::from_function("cob", 2, 3, [](std::span<const State> x) {
    return static_cast<State>(x[0] | (x[1] & x[2]));
  });
}

LocalMap dth() { return LocalMap("dth", 2, 0, {0}); }

LocalMap bth() { return LocalMap("bth", 2, 0, {1}); }

LocalMap bra() {
  return LocalMap::from_function("bra", 2, 2,
                                 [](std::span<const State> x) { return static_cast<State>(x[0] | x[1]); });
}

LocalMap identity(std::size_t n_states) {
  std::vector<State> table(n_states);
  std::iota(table.begin(), table.end(), State{0});
  return LocalMap("identity", n_states, 1, std::move(table));
}

std::optional<LocalMap> builtin(const std::string& name, std::size_t n_states) {
  if (name == "identity") return identity(n_states);
  if (n_states != 2) return std::nullopt;
  if (name == "cob") return cob();
  if (name == "dth") return dth();
  if (name == "bth") return bth();
  if (name == "bra") return bra();
  return std::nullopt;
}

}  // namespace maps

// ---------------------------------------------------------------------------
// MapFamily

namespace {

void check_rate(double rate, const std::string& what) {
  if (!(rate >= 0.0) || !std::isfinite(rate))
    throw Error(ErrorKind::NegativeRate, what + " has rate " + format_double(rate));
}

std::size_t pick(std::span<const double> cumulative, double total, double u) noexcept {
  const double target = u * total;
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
  const auto idx = static_cast<std::size_t>(it - cumulative.begin());
  return std::min(idx, cumulative.size() - 1);
}

}  // namespace

MapFamily::MapFamily(StateSpace space, std::vector<MapEntry> entries) : space_(std::move(space)) {
  for (auto& e : entries) {
    check_rate(e.rate, "map '" + e.map.name() + "'");
    if (e.map.n_states() != space_.size())
      throw Error(ErrorKind::InvalidArgument, "map '" + e.map.name() + "' is over a different state space");
    if (e.rate > 0.0) entries_.push_back(std::move(e));
  }
  if (entries_.empty()) throw Error(ErrorKind::EmptyFamily, "family has no entry with positive rate");
  double weighted_arity = 0.0;
  for (const auto& e : entries_) {
    total_rate_ += e.rate;
    cumulative_.push_back(total_rate_);
    weighted_arity += e.rate * static_cast<double>(e.map.arity());
    max_arity_ = std::max(max_arity_, e.map.arity());
  }
  mean_arity_ = weighted_arity / total_rate_;
}

std::size_t MapFamily::choose(double u) const noexcept { return pick(cumulative_, total_rate_, u); }

bool MapFamily::is_monotone() const {
  if (!space_.has_bounds()) return false;
  return std::all_of(entries_.begin(), entries_.end(),
                     [&](const MapEntry& e) { return e.map.is_monotone(space_); });
}

FamilyConstants constants(const MapFamily& family) {
  double K = 0.0;
  double L = 0.0;
  bool some_not_one = false;
  for (const auto& e : family.entries()) {
    const auto k = static_cast<double>(e.map.arity());
    K += e.rate * (k - 1.0);
    L += e.rate * (k + 1.0);
    if (e.map.arity() != 1) some_not_one = true;
  }
  return {K, L, K < 0.0 || (K == 0.0 && some_not_one)};
}

// ---------------------------------------------------------------------------
// StructuredFamily

StructuredFamily::StructuredFamily(StateSpace space, std::vector<StructuredEntry> entries)
    : space_(std::move(space)) {
  for (auto& e : entries) {
    check_rate(e.rate, "structured entry");
    const std::size_t lambda = e.lambda();
    if (lambda == 0) throw Error(ErrorKind::InvalidArgument, "structured entry with no components");
    for (auto& c : e.components) {
      if (c.map.arity() != lambda || c.map.n_states() != space_.size())
        throw Error(ErrorKind::InvalidArgument,
                    "component '" + c.map.name() + "' must be a map S^" + std::to_string(lambda) + " -> S");
      std::sort(c.depends_on.begin(), c.depends_on.end());
      c.depends_on.erase(std::unique(c.depends_on.begin(), c.depends_on.end()), c.depends_on.end());
      for (std::size_t d : c.depends_on)
        if (d >= lambda) throw Error(ErrorKind::InvalidArgument, "dependency index out of range");
      for (std::size_t i = 0; i < lambda; ++i) {
        const bool declared = std::binary_search(c.depends_on.begin(), c.depends_on.end(), i);
        if (!declared && c.map.depends_on(i))
          throw Error(ErrorKind::InvalidArgument, "component '" + c.map.name() +
                                                      "' depends on undeclared coordinate " +
                                                      std::to_string(i + 1));
      }
    }
    if (e.rate > 0.0) entries_.push_back(std::move(e));
  }
  if (entries_.empty()) throw Error(ErrorKind::EmptyFamily, "structured family has no entry with positive rate");
  for (const auto& e : entries_) {
    total_rate_ += e.rate;
    cumulative_.push_back(total_rate_);
    max_lambda_ = std::max(max_lambda_, e.lambda());
  }
}

std::size_t StructuredFamily::choose(double u) const noexcept {
  return pick(cumulative_, total_rate_, u);
}

MapFamily flatten(const StructuredFamily& structured, bool keep_identity) {
  std::vector<MapEntry> flat;
  for (const auto& e : structured.entries()) {
    for (std::size_t i = 0; i < e.lambda(); ++i) {
      const Component& c = e.components[i];
      LocalMap reduced = c.map.restrict_to(c.depends_on);
      const bool is_projection =
          c.depends_on.size() == 1 && c.depends_on[0] == i && reduced.is_identity();
      if (is_projection && !keep_identity) continue;
      flat.push_back({std::move(reduced), e.rate});
    }
  }
  if (flat.empty())
    throw Error(ErrorKind::EmptyFamily, "every component of the structured family is the identity");
  return MapFamily(structured.space(), std::move(flat));
}

StructuredFamily wrap(const MapFamily& family) {
  const std::size_t n = family.space().size();
  std::vector<StructuredEntry> out;
  for (const auto& e : family.entries()) {
    const std::size_t k = e.map.arity();
    const std::size_t lambda = std::max<std::size_t>(k, 1);
    StructuredEntry se{e.rate, {}};
    const LocalMap& g = e.map;
    LocalMap lifted = LocalMap::from_function(g.name(), n, lambda, [&](std::span<const State> x) {
      return g(x.first(k));
    });
    std::vector<std::size_t> deps(k);
    std::iota(deps.begin(), deps.end(), std::size_t{0});
    se.components.push_back({std::move(lifted), std::move(deps)});
    for (std::size_t j = 1; j < lambda; ++j) {
      LocalMap proj = LocalMap::from_function("identity", n, lambda,
                                              [j](std::span<const State> x) { return x[j]; });
      se.components.push_back({std::move(proj), {j}});
    }
    out.push_back(std::move(se));
  }
  return StructuredFamily(family.space(), std::move(out));
}

namespace presets {

MapFamily coop(double alpha) {
  check_rate(alpha, "cob");
  return MapFamily(StateSpace::binary(), {{maps::cob(), alpha}, {maps::dth(), 1.0}});
}

MapFamily coop_birth(double alpha, double beta) {
  check_rate(alpha, "cob");
  check_rate(beta, "bth");
  return MapFamily(StateSpace::binary(), {{maps::cob(), alpha}, {maps::dth(), 1.0}, {maps::bth(), beta}});
}

MapFamily moran(double gamma, double s, double u, double nu0, double nu1) {
  check_rate(gamma, "cob");
  check_rate(s, "bra");
  check_rate(u, "mutation");
  check_rate(nu0, "nu0");
  check_rate(nu1, "nu1");
  if (std::abs(nu0 + nu1 - 1.0) > 1e-12)
    throw Error(ErrorKind::InvalidArgument, "mutation probabilities must sum to 1");
  return MapFamily(StateSpace::binary(), {{maps::cob(), gamma},
                                          {maps::bra(), s},
                                          {maps::dth(), u * nu0},
                                          {maps::bth(), u * nu1}});
}

}  // namespace presets

// ---------------------------------------------------------------------------
// Dist

Dist::Dist(std::vector<double> weights) : w_(std::move(weights)) {
  if (w_.empty()) throw Error(ErrorKind::InvalidArgument, "empty probability vector");
  double total = 0.0;
  for (double& w : w_) {
    if (!std::isfinite(w) || w < -1e-12)
      throw Error(ErrorKind::InvalidArgument, "probability weight " + format_double(w) + " is invalid");
    if (w < 0.0) w = 0.0;
    total += w;
  }
  if (!(total > 0.0)) throw Error(ErrorKind::InvalidArgument, "probability weights sum to zero");
  for (double& w : w_) w /= total;
}

Dist Dist::delta(std::size_t n_states, State s) {
  if (s >= n_states) throw Error(ErrorKind::InvalidArgument, "delta outside state space");
  std::vector<double> w(n_states, 0.0);
  w[s] = 1.0;
  return Dist(std::move(w));
}

Dist Dist::bernoulli(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::InvalidArgument, "Bernoulli parameter outside [0,1]");
  return Dist({1.0 - p, p});
}

Dist Dist::uniform(std::size_t n_states) { return Dist(std::vector<double>(n_states, 1.0)); }

// ---------------------------------------------------------------------------
// Config I/O

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void config_error(int line, const std::string& msg) {
  throw Error(ErrorKind::ConfigError, "line " + std::to_string(line) + ": " + msg);
}

}  // namespace

MapFamily parse_family(std::istream& in) {
  std::optional<std::size_t> n_states;
  std::vector<std::pair<State, State>> order;
  std::map<std::string, std::pair<std::string, int>> map_specs;  // name -> (spec, line)
  std::vector<std::tuple<std::string, double, int>> rates;

  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) config_error(line_no, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "states") {
      try {
        n_states = std::stoul(value);
      } catch (const std::exception&) {
        config_error(line_no, "invalid state count '" + value + "'");
      }
    } else if (key == "order") {
      std::istringstream ss(value);
      std::string rel;
      while (ss >> rel) {
        const auto lt = rel.find('<');
        if (lt == std::string::npos) config_error(line_no, "order relations look like a<b");
        order.emplace_back(static_cast<State>(std::stoul(rel.substr(0, lt))),
                           static_cast<State>(std::stoul(rel.substr(lt + 1))));
      }
    } else if (key.rfind("map.", 0) == 0) {
      map_specs[key.substr(4)] = {value, line_no};
    } else if (key.rfind("rate.", 0) == 0) {
      double r = 0.0;
      try {
        std::size_t used = 0;
        r = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
      } catch (const std::exception&) {
        config_error(line_no, "invalid rate '" + value + "'");
      }
      rates.emplace_back(key.substr(5), r, line_no);
    } else {
      config_error(line_no, "unknown key '" + key + "'");
    }
  }
  if (!n_states) throw Error(ErrorKind::ConfigError, "missing 'states'");
  StateSpace space(*n_states);
  if (!order.empty()) space = space.with_order(order);
  else if (*n_states == 2) space = StateSpace::binary();

  std::vector<MapEntry> entries;
  for (const auto& [name, rate, line] : rates) {
    std::optional<LocalMap> map;
    if (auto it = map_specs.find(name); it != map_specs.end()) {
      std::istringstream ss(it->second.first);
      std::string head;
      ss >> head;
      if (head == "table") {
        std::size_t arity = 0;
        if (!(ss >> arity)) config_error(it->second.second, "table needs an arity");
        std::vector<State> table;
        State v = 0;
        while (ss >> v) table.push_back(v);
        try {
          map = LocalMap(name, *n_states, arity, std::move(table));
        } catch (const Error& e) {
          config_error(it->second.second, e.what());
        }
      } else {
        map = maps::builtin(head, *n_states);
        if (!map) config_error(it->second.second, "unknown builtin map '" + head + "'");
      }
    } else {
      map = maps::builtin(name, *n_states);
      if (!map) config_error(line, "rate given for undefined map '" + name + "'");
    }
    entries.push_back({std::move(*map), rate});
  }
  return MapFamily(std::move(space), std::move(entries));
}

MapFamily load_family(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigError, "cannot open family file '" + path + "'");
  return parse_family(in);
}

std::string format_family(const MapFamily& family) {
  std::ostringstream out;
  const std::size_t n = family.space().size();
  out << "states = " << n << "\n";
  if (family.space().has_order() && !(n == 2 && family.space() == StateSpace::binary())) {
    out << "order =";
    for (State a = 0; a < n; ++a)
      for (State b = 0; b < n; ++b)
        if (a != b && family.space().leq(a, b)) out << ' ' << a << '<' << b;
    out << "\n";
  }
  // Duplicate names get a numeric suffix so that every entry stays addressable.
  std::map<std::string, int> seen;
  for (const auto& e : family.entries()) {
    std::string key = e.map.name();
    if (int count = seen[key]++; count > 0) key += "_" + std::to_string(count);
    const auto builtin = maps::builtin(e.map.name(), n);
    if (builtin && builtin->table().size() == e.map.table().size() &&
        std::equal(builtin->table().begin(), builtin->table().end(), e.map.table().begin())) {
      out << "map." << key << " = " << e.map.name() << "\n";
    } else {
      out << "map." << key << " = table " << e.map.arity();
      for (State v : e.map.table()) out << ' ' << v;
      out << "\n";
    }
    out << "rate." << key << " = " << format_double(e.rate) << "\n";
  }
  return out.str();
}

}  // namespace rtp
