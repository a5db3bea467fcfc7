#include "chanhom/config.hpp"

#include "chanhom/errors.hpp"

#include <json.hpp>

#include <boost/integer/common_factor.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace chanhom {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

// Object reader that remembers the keys it consumed, so leftovers can be
// reported as unknown fields.
class Node {
public:
  Node(json j, std::string path) : j_(std::move(j)), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }
  std::string where() const { return path_.empty() ? "<root>" : path_; }
  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }
  const json& get(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError(at(key) + " required");
    return j_.at(key);
  }

  double number(const std::string& key, double fallback) {
    return has(key) ? as_number(j_.at(key), at(key)) : fallback;
  }
  double number(const std::string& key) { return as_number(get(key), at(key)); }
  std::int64_t integer(const std::string& key, std::int64_t fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number_integer()) throw ConfigError(at(key) + ": expected an integer");
    return v.get<std::int64_t>();
  }
  Rational rational(const std::string& key, Rational fallback) {
    return has(key) ? as_rational(j_.at(key), at(key)) : fallback;
  }
  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(at(key) + ": expected a string");
    return v.get<std::string>();
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(at(it.key()) + ": unknown field");
  }

  static double as_number(const json& v, const std::string& path) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
      try {
        return to_double(parse_rational(v.get<std::string>()));
      } catch (const ValidationError&) {
      }
    }
    throw ConfigError(path + ": expected a number");
  }
  static Rational as_rational(const json& v, const std::string& path) {
    if (v.is_number_integer()) return Rational(v.get<std::int64_t>());
    if (v.is_string()) {
      try {
        return parse_rational(v.get<std::string>());
      } catch (const ValidationError&) {
      }
    }
    if (v.is_number()) {
      // Decimal literal: accept only values with an exact short decimal form.
      std::ostringstream os;
      os.precision(15);
      os << v.get<double>();
      try {
        const Rational r = parse_rational(os.str());
        if (std::abs(to_double(r) - v.get<double>()) <= 1e-15 * std::abs(v.get<double>())) return r;
      } catch (const ValidationError&) {
      }
    }
    throw ConfigError(path + ": expected a rational number such as \"1/4\"");
  }

private:
  json j_;
  std::string path_;
  std::set<std::string> seen_;
};

RateSpec parse_rate(const json& j, const std::string& path) {
  Node n(j, path);
  RateSpec r;
  r.kind = RateKind::Zero;
  const std::string kind = n.string("kind", "zero");
  try {
    r.kind = parse_rate_kind(kind);
  } catch (const ConfigError&) {
    throw ConfigError(n.at("kind") + ": unknown kinetics kind '" + kind + "'");
  }
  switch (r.kind) {
    case RateKind::LinearDecay: r.lambda = n.number("lambda"); break;
    case RateKind::LogisticClamped:
      r.r = n.number("r");
      r.u_cap = n.number("u_cap", 1.0);
      r.clamp = n.number("clamp", 10.0);
      break;
    case RateKind::Exchange:
      r.kappa = n.number("kappa");
      r.u_ext = n.number("u_ext", 0.0);
      break;
    case RateKind::Tabulated: {
      const json& u = n.get("u");
      const json& v = n.get("v");
      if (!u.is_array() || !v.is_array()) throw ConfigError(path + ".u and .v must be arrays");
      for (std::size_t i = 0; i < u.size(); ++i)
        r.table_u.push_back(Node::as_number(u[i], path + ".u[" + std::to_string(i) + "]"));
      for (std::size_t i = 0; i < v.size(); ++i)
        r.table_v.push_back(Node::as_number(v[i], path + ".v[" + std::to_string(i) + "]"));
      break;
    }
    default: break;
  }
  r.periodic_amp = n.number("periodic_amp", 0.0);
  r.periodic_mode = static_cast<int>(n.integer("periodic_mode", 1));
  r.vertical_slope = n.number("vertical_slope", 0.0);
  r.arc_amp = n.number("arc_amp", 0.0);
  r.arc_mode = static_cast<int>(n.integer("arc_mode", 1));
  r.time_amp = n.number("time_amp", 0.0);
  r.time_freq = n.number("time_freq", 1.0);
  n.finish();
  r.validate(path);
  return r;
}

ojson rate_json(const RateSpec& r) {
  ojson j;
  j["kind"] = rate_kind_name(r.kind);
  switch (r.kind) {
    case RateKind::LinearDecay: j["lambda"] = r.lambda; break;
    case RateKind::LogisticClamped:
      j["r"] = r.r;
      j["u_cap"] = r.u_cap;
      j["clamp"] = r.clamp;
      break;
    case RateKind::Exchange:
      j["kappa"] = r.kappa;
      j["u_ext"] = r.u_ext;
      break;
    case RateKind::Tabulated:
      j["u"] = r.table_u;
      j["v"] = r.table_v;
      break;
    default: break;
  }
  j["periodic_amp"] = r.periodic_amp;
  j["periodic_mode"] = r.periodic_mode;
  j["vertical_slope"] = r.vertical_slope;
  j["arc_amp"] = r.arc_amp;
  j["arc_mode"] = r.arc_mode;
  j["time_amp"] = r.time_amp;
  j["time_freq"] = r.time_freq;
  return j;
}

InitialExpr parse_initial(const json& j, const std::string& path) {
  InitialExpr e;
  if (j.is_number() || j.is_string()) {
    e.a = Node::as_number(j, path);
    return e;
  }
  Node n(j, path);
  e.a = n.number("a", 0.0);
  e.b = n.number("b", 0.0);
  e.c = n.number("c", 0.0);
  e.mode = static_cast<int>(n.integer("mode", 1));
  n.finish();
  return e;
}

ojson initial_json(const InitialExpr& e) {
  ojson j;
  j["a"] = e.a;
  j["b"] = e.b;
  j["c"] = e.c;
  j["mode"] = e.mode;
  return j;
}

std::vector<ChannelSegment> parse_profile(Node& geo) {
  const json& pj = geo.get("profile");
  Node p(pj, geo.at("profile"));
  const std::string type = p.string("type", "rectangular");
  std::vector<ChannelSegment> segs;
  if (type == "rectangular") {
    segs.push_back({Rational(-1), Rational(1), p.rational("width", Rational(1, 2))});
  } else if (type == "segments") {
    const json& arr = p.get("segments");
    if (!arr.is_array() || arr.empty()) throw ConfigError(p.at("segments") + ": expected a non-empty array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      Node s(arr[i], p.at("segments") + "[" + std::to_string(i) + "]");
      ChannelSegment seg;
      seg.y_lo = s.as_rational(s.get("y_lo"), s.at("y_lo"));
      seg.y_hi = s.as_rational(s.get("y_hi"), s.at("y_hi"));
      seg.width = s.as_rational(s.get("width"), s.at("width"));
      s.finish();
      segs.push_back(seg);
    }
  } else {
    throw ConfigError(p.at("type") + ": expected \"rectangular\" or \"segments\"");
  }
  p.finish();
  return segs;
}

}  // namespace

double StudyConfig::eps_min() const { return to_double(epsilon.back()); }

double StudyConfig::dt() const {
  return dt_rule.scaled ? to_double(dt_rule.value * epsilon.back()) : to_double(dt_rule.value);
}

std::size_t StudyConfig::columns(std::size_t i) const {
  return static_cast<std::size_t>(epsilon.at(i).denominator() / epsilon.at(i).numerator());
}

StudyConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  Node r(root, "");
  StudyConfig c;
  const auto version = r.integer("schema_version", kSchemaVersion);
  if (version != kSchemaVersion)
    throw ConfigError("schema_version: unsupported version " + std::to_string(version) + " (expected " +
                      std::to_string(kSchemaVersion) + ")");
  c.name = r.string("name", c.name);

  {
    Node g(r.get("geometry"), "geometry");
    c.height = g.number("height", 1.0);
    if (!(c.height > 0.0) || !std::isfinite(c.height)) throw ConfigError("geometry.height must be positive");
    c.segments = parse_profile(g);
    c.alignment = g.integer("alignment", 0);
    g.finish();
    try {
      c.cell = std::make_shared<const CellGeometry>(ChannelProfile::create(c.segments, c.alignment));
    } catch (const GeometryError& e) {
      throw ConfigError(std::string("geometry.profile: ") + e.what());
    }
  }

  {
    if (!r.has("diffusivity")) throw ConfigError("diffusivity required");
    Node d(r.get("diffusivity"), "diffusivity");
    c.diffusion.d_plus = d.number("plus");
    c.diffusion.d_minus = d.number("minus");
    if (!d.has("channel")) throw ConfigError("diffusivity.channel required");
    const json& ch = d.get("channel");
    auto tensor = [](const json& t, const std::string& path) -> std::array<double, 2> {
      if (t.is_number() || t.is_string()) {
        const double v = Node::as_number(t, path);
        return {v, v};
      }
      if (!t.is_array() || t.size() != 2) throw ConfigError(path + ": expected [D_xx, D_yy]");
      return {Node::as_number(t[0], path + "[0]"), Node::as_number(t[1], path + "[1]")};
    };
    if (ch.is_array() && !ch.empty() && ch[0].is_array()) {
      for (std::size_t i = 0; i < ch.size(); ++i)
        c.diffusion.channel.push_back(tensor(ch[i], "diffusivity.channel[" + std::to_string(i) + "]"));
    } else {
      const auto t = tensor(ch, "diffusivity.channel");
      c.diffusion.channel.assign(c.segments.size(), t);
    }
    d.finish();
    c.diffusion.validate(*c.cell);
  }

  {
    Node k(r.has("kinetics") ? root.at("kinetics") : json::object(), "kinetics");
    auto rate = [&](const char* key) {
      return k.has(key) ? parse_rate(root.at("kinetics").at(key), std::string("kinetics.") + key) : RateSpec::zero();
    };
    c.kinetics.f_plus = rate("f_plus");
    c.kinetics.f_minus = rate("f_minus");
    c.kinetics.g = rate("g");
    c.kinetics.h = rate("h");
    k.finish();
  }

  {
    Node i(r.has("initial") ? root.at("initial") : json::object(), "initial");
    if (i.has("plus")) c.initial.plus = parse_initial(root.at("initial").at("plus"), "initial.plus");
    if (i.has("minus")) c.initial.minus = parse_initial(root.at("initial").at("minus"), "initial.minus");
    if (i.has("channel")) c.initial.channel = parse_initial(root.at("initial").at("channel"), "initial.channel");
    i.finish();
  }

  {
    Node t(r.get("time"), "time");
    c.final_time = t.number("T");
    if (!(c.final_time > 0.0) || !std::isfinite(c.final_time)) throw ConfigError("time.T must be positive");
    if (t.has("dt")) {
      Node d(root.at("time").at("dt"), "time.dt");
      const std::string rule = d.string("rule", "fixed");
      if (rule == "fixed") {
        c.dt_rule.scaled = false;
        c.dt_rule.value = d.rational("value", Rational(1, 128));
      } else if (rule == "scaled") {
        c.dt_rule.scaled = true;
        c.dt_rule.value = d.rational("factor", Rational(1, 8));
      } else {
        throw ConfigError("time.dt.rule: expected \"fixed\" or \"scaled\"");
      }
      d.finish();
      if (c.dt_rule.value <= Rational(0)) throw ConfigError("time.dt: value must be positive");
    }
    t.finish();
  }

  {
    const json& e = r.get("epsilon");
    if (!e.is_array() || e.empty()) throw ConfigError("epsilon: expected a non-empty array");
    for (std::size_t i = 0; i < e.size(); ++i) {
      const std::string path = "epsilon[" + std::to_string(i) + "]";
      Rational v;
      try {
        v = Node::as_rational(e[i], path);
      } catch (const ConfigError&) {
        if (e[i].is_number()) throw ConfigError(path + ": eps^-1 must be a positive integer");
        throw;
      }
      if (v <= Rational(0) || v.numerator() != 1)
        throw ConfigError(path + ": eps^-1 must be a positive integer (got " + to_string(v) + ")");
      if (to_double(v) >= c.height) throw ConfigError(path + ": eps must be smaller than geometry.height");
      if (!c.epsilon.empty() && !(v < c.epsilon.back()))
        throw ConfigError(path + ": epsilon list must be strictly decreasing");
      c.epsilon.push_back(v);
    }
  }

  {
    Node f(r.has("refinement") ? root.at("refinement") : json::object(), "refinement");
    c.k = f.integer("k", 4);
    c.m = f.integer("m", c.k);
    c.sigma_nodes = f.integer("sigma_nodes", 0);
    c.bulk_sub = f.integer("bulk_sub", 1);
    c.grid.grading_ratio = f.number("grading_ratio", c.grid.grading_ratio);
    c.grid.bulk_max_spacing = f.number("bulk_max_spacing", c.grid.bulk_max_spacing);
    f.finish();
    if (c.k < 1) throw ConfigError("refinement.k must be a positive integer");
    if (c.m < 1) throw ConfigError("refinement.m must be a positive integer");
    if (c.bulk_sub < 1) throw ConfigError("refinement.bulk_sub must be a positive integer");
    if (!(c.grid.grading_ratio >= 1.0)) throw ConfigError("refinement.grading_ratio must be at least 1");
    if (!(c.grid.bulk_max_spacing > 0.0)) throw ConfigError("refinement.bulk_max_spacing must be positive");
    check_alignment(c.cell->profile(), c.k);
    check_alignment(c.cell->profile(), c.m);
    if (c.k != c.m)
      throw AlignmentError("refinement k=" + std::to_string(c.k) + " and m=" + std::to_string(c.m) +
                           " must be equal for the unfolding");
    std::int64_t l = 1;
    for (std::size_t i = 0; i < c.epsilon.size(); ++i) l = boost::integer::lcm(l, static_cast<std::int64_t>(c.columns(i)));
    if (c.sigma_nodes == 0) c.sigma_nodes = l;
    if (c.sigma_nodes < 1 || c.sigma_nodes % l != 0)
      throw AlignmentError("refinement.sigma_nodes=" + std::to_string(c.sigma_nodes) +
                           " must be a multiple of every eps^-1 (" + std::to_string(l) + ")");
  }

  {
    Node o(r.has("output") ? root.at("output") : json::object(), "output");
    const auto stride = o.integer("stride", 1);
    if (stride < 1) throw ConfigError("output.stride must be a positive integer");
    c.stride = static_cast<std::size_t>(stride);
    c.out_dir = o.string("dir", c.out_dir);
    o.finish();
  }

  {
    Node d(r.has("diagnostics") ? root.at("diagnostics") : json::object(), "diagnostics");
    c.shift_l = d.integer("shift_l", 1);
    c.shift_h = d.number("shift_h", 0.25);
    c.theta = d.number("theta", 1.0);
    const auto nr = d.integer("random_fields", 100);
    d.finish();
    if (c.shift_l == 0) throw ConfigError("diagnostics.shift_l must be non-zero");
    if (!(c.shift_h > 0.0 && c.shift_h < 0.5)) throw ConfigError("diagnostics.shift_h must lie in (0, 1/2)");
    if (!(c.theta > 0.0)) throw ConfigError("diagnostics.theta must be positive");
    if (nr < 1) throw ConfigError("diagnostics.random_fields must be positive");
    c.random_fields = static_cast<std::size_t>(nr);
  }

  if (r.has("seed")) {
    const json& s = root.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0))
      throw ConfigError("seed: expected a non-negative integer");
    c.seed = s.get<std::uint64_t>();
  }
  r.finish();

  const double steps = c.final_time / c.dt();
  if (std::abs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps))
    throw ConfigError("time.dt must divide time.T");
  return c;
}

StudyConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_echo(const StudyConfig& c) {
  ojson j;
  j["schema_version"] = kSchemaVersion;
  j["name"] = c.name;
  ojson segs = ojson::array();
  for (const auto& s : c.segments)
    segs.push_back({{"y_lo", to_string(s.y_lo)}, {"y_hi", to_string(s.y_hi)}, {"width", to_string(s.width)}});
  j["geometry"] = {{"height", c.height},
                   {"profile", {{"type", "segments"}, {"segments", segs}}},
                   {"alignment", c.cell ? c.cell->profile().alignment() : c.alignment}};
  ojson ch = ojson::array();
  for (const auto& t : c.diffusion.channel) ch.push_back({t[0], t[1]});
  j["diffusivity"] = {{"plus", c.diffusion.d_plus}, {"minus", c.diffusion.d_minus}, {"channel", ch}};
  j["kinetics"] = {{"f_plus", rate_json(c.kinetics.f_plus)},
                   {"f_minus", rate_json(c.kinetics.f_minus)},
                   {"g", rate_json(c.kinetics.g)},
                   {"h", rate_json(c.kinetics.h)}};
  j["initial"] = {{"plus", initial_json(c.initial.plus)},
                  {"minus", initial_json(c.initial.minus)},
                  {"channel", initial_json(c.initial.channel)}};
  ojson dt;
  dt["rule"] = c.dt_rule.scaled ? "scaled" : "fixed";
  dt[c.dt_rule.scaled ? "factor" : "value"] = to_string(c.dt_rule.value);
  j["time"] = {{"T", c.final_time}, {"dt", dt}};
  ojson eps = ojson::array();
  for (const auto& e : c.epsilon) eps.push_back(to_string(e));
  j["epsilon"] = eps;
  j["refinement"] = {{"k", c.k},
                     {"m", c.m},
                     {"sigma_nodes", c.sigma_nodes},
                     {"bulk_sub", c.bulk_sub},
                     {"grading_ratio", c.grid.grading_ratio},
                     {"bulk_max_spacing", c.grid.bulk_max_spacing}};
  j["output"] = {{"stride", c.stride}, {"dir", c.out_dir}};
  j["diagnostics"] = {{"shift_l", c.shift_l},
                      {"shift_h", c.shift_h},
                      {"theta", c.theta},
                      {"random_fields", c.random_fields}};
  j["seed"] = c.seed;
  return j.dump(2);
}

StudyConfig benchmark_b1() {
  return parse_config(R"({
    "name": "B1",
    "geometry": {"height": 1, "profile": {"type": "rectangular", "width": "1/2"}},
    "diffusivity": {"plus": 1, "minus": 2, "channel": [0.5, 0.5]},
    "kinetics": {
      "f_plus": {"kind": "logistic_clamped", "r": 1, "u_cap": 1, "clamp": 10},
      "f_minus": {"kind": "logistic_clamped", "r": 1, "u_cap": 1, "clamp": 10},
      "g": {"kind": "linear_decay", "lambda": 0.5},
      "h": {"kind": "exchange", "kappa": 0.5, "u_ext": 0}
    },
    "initial": {"plus": 1, "minus": 0, "channel": {"a": 0.5, "b": 0.5}},
    "time": {"T": 0.5, "dt": {"rule": "fixed", "value": "1/128"}},
    "epsilon": ["1/4", "1/8", "1/16"],
    "refinement": {"k": 4, "m": 4},
    "output": {"dir": "out/b1"}
  })");
}

}  // namespace chanhom
