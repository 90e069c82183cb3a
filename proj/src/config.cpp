#include "wvalab/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "wvalab/error.hpp"

namespace wvalab::config {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::ConfigParse, path + ": " + what);
}

void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed,
                const std::set<std::string>& required) {
  if (!obj.is_object()) fail(path, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) fail(path + "." + key, "unknown key");
  }
  for (const auto& key : required) {
    if (!obj.contains(key)) fail(path + "." + key, "missing required key");
  }
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(path, "must be finite");
  return v;
}

std::int64_t get_integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<std::int64_t>();
}

std::string get_string(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

Complex get_complex(const json& j, const std::string& path) {
  if (j.is_number()) return {get_number(j, path), 0.0};
  check_keys(j, path, {"re", "im"}, {"re", "im"});
  return {get_number(j["re"], path + ".re"), get_number(j["im"], path + ".im")};
}

json emit_complex(Complex z) { return json{{"re", z.real()}, {"im", z.imag()}}; }

CVector get_vector(const json& j, const std::string& path, int dim) {
  if (j.is_string()) {
    const std::string name = j.get<std::string>();
    if (name == "plus" && dim == 2) {
      CVector v(2);
      v << 1.0 / std::numbers::sqrt2, 1.0 / std::numbers::sqrt2;
      return v;
    }
    fail(path, "unknown named state '" + name + "' (only \"plus\" for dim 2)");
  }
  if (!j.is_array()) fail(path, "expected an array of amplitudes");
  if (static_cast<int>(j.size()) != dim) {
    fail(path, "expected " + std::to_string(dim) + " amplitudes, got " + std::to_string(j.size()));
  }
  CVector v(dim);
  for (int i = 0; i < dim; ++i) v[i] = get_complex(j[i], path + "[" + std::to_string(i) + "]");
  if (std::abs(v.squaredNorm() - 1.0) > 1e-12) {
    std::ostringstream os;
    os.precision(17);
    os << "state is not normalized (norm^2 = " << v.squaredNorm() << ")";
    fail(path, os.str());
  }
  return v;
}

json emit_vector(const CVector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(emit_complex(v[i]));
  return out;
}

CMatrix sigma_z() {
  CMatrix z = CMatrix::Zero(2, 2);
  z(0, 0) = 1.0;
  z(1, 1) = -1.0;
  return z;
}

std::pair<double, double> get_range(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2) fail(path, "expected [lo, hi]");
  const double lo = get_number(j[0], path + "[0]");
  const double hi = get_number(j[1], path + "[1]");
  if (!(hi > lo)) fail(path, "hi must exceed lo");
  return {lo, hi};
}

SystemSpec parse_system(const json& j, const std::string& path) {
  check_keys(j, path, {"dim", "observable", "pre", "post"}, {"dim", "observable", "pre"});
  SystemSpec s;
  const std::int64_t dim = get_integer(j["dim"], join(path, "dim"));
  if (dim < 2 || dim > 16) fail(join(path, "dim"), "must be in [2, 16]");
  const int d = static_cast<int>(dim);
  const json& obs = j["observable"];
  if (obs.is_string()) {
    s.observable = obs.get<std::string>();
    if (s.observable != "sigma_z") fail(join(path, "observable"), "unknown named observable");
    if (d != 2) fail(join(path, "observable"), "sigma_z needs dim 2");
    s.matrix = sigma_z();
  } else {
    const std::string mp = join(path, "observable");
    if (!obs.is_array() || static_cast<int>(obs.size()) != d) {
      fail(mp, "expected \"sigma_z\" or a dim x dim matrix");
    }
    s.observable = "matrix";
    s.matrix.resize(d, d);
    for (int r = 0; r < d; ++r) {
      const std::string rp = mp + "[" + std::to_string(r) + "]";
      if (!obs[r].is_array() || static_cast<int>(obs[r].size()) != d) fail(rp, "expected a row");
      for (int c = 0; c < d; ++c) {
        s.matrix(r, c) = get_complex(obs[r][c], rp + "[" + std::to_string(c) + "]");
      }
    }
    const double scale = std::max(1.0, s.matrix.cwiseAbs().maxCoeff());
    if ((s.matrix - s.matrix.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      fail(mp, "observable is not hermitian");
    }
  }
  s.pre = get_vector(j["pre"], join(path, "pre"), d);
  if (j.contains("post")) s.post = get_vector(j["post"], join(path, "post"), d);
  return s;
}

PointerSpec parse_pointer(const json& j, const std::string& path) {
  if (!j.is_object() || !j.contains("kind")) fail(join(path, "kind"), "missing required key");
  PointerSpec p;
  p.kind = get_string(j["kind"], join(path, "kind"));
  if (p.kind == "vacuum") {
    check_keys(j, path, {"kind", "truncation"}, {"kind"});
  } else if (p.kind == "coherent") {
    check_keys(j, path, {"kind", "alpha", "truncation"}, {"kind", "alpha"});
  } else if (p.kind == "squeezed_coherent") {
    check_keys(j, path, {"kind", "alpha", "xi", "truncation"}, {"kind", "xi"});
  } else {
    fail(join(path, "kind"), "expected vacuum, coherent or squeezed_coherent");
  }
  if (j.contains("alpha")) p.alpha = get_complex(j["alpha"], join(path, "alpha"));
  if (j.contains("xi")) p.xi = get_complex(j["xi"], join(path, "xi"));
  if (j.contains("truncation")) {
    const std::int64_t t = get_integer(j["truncation"], join(path, "truncation"));
    if (t < 2 || t > 4096) fail(join(path, "truncation"), "must be in [2, 4096]");
    p.truncation = static_cast<int>(t);
  }
  return p;
}

CouplingSpec parse_coupling(const json& j, const std::string& path) {
  check_keys(j, path, {"g", "omega", "readout", "N"}, {"g"});
  CouplingSpec c;
  c.g = get_number(j["g"], join(path, "g"));
  if (c.g < 0.0) fail(join(path, "g"), "must be >= 0");
  for (const char* key : {"omega", "readout"}) {
    if (!j.contains(key)) continue;
    const std::string v = get_string(j[key], join(path, key));
    if (v != "q" && v != "p") fail(join(path, key), "expected \"q\" or \"p\"");
    (std::string_view(key) == "omega" ? c.omega : c.readout) = v;
  }
  if (j.contains("N")) {
    c.N = get_integer(j["N"], join(path, "N"));
    if (c.N < 1) fail(join(path, "N"), "must be >= 1");
  }
  return c;
}

SweepSpec parse_sweep(const json& j, const std::string& path) {
  check_keys(j, path, {"parameter", "re_range", "im_range", "steps"}, {"parameter"});
  SweepSpec s;
  s.parameter = get_string(j["parameter"], join(path, "parameter"));
  if (s.parameter != "xi") fail(join(path, "parameter"), "only \"xi\" is supported");
  if (j.contains("re_range")) std::tie(s.re_lo, s.re_hi) = get_range(j["re_range"], join(path, "re_range"));
  if (j.contains("im_range")) std::tie(s.im_lo, s.im_hi) = get_range(j["im_range"], join(path, "im_range"));
  if (j.contains("steps")) {
    const std::int64_t n = get_integer(j["steps"], join(path, "steps"));
    if (n < 2 || n > 4001) fail(join(path, "steps"), "must be in [2, 4001]");
    s.steps = static_cast<int>(n);
  }
  return s;
}

McSpec parse_mc(const json& j, const std::string& path) {
  check_keys(j, path, {"trials", "seed"}, {"trials"});
  McSpec m;
  m.trials = get_integer(j["trials"], join(path, "trials"));
  if (m.trials < 1) fail(join(path, "trials"), "must be >= 1");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) fail(join(path, "seed"), "expected an unsigned integer");
    m.seed = j["seed"].get<std::uint64_t>();
  }
  return m;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::optional<protocol::SystemState> resolve_post(const ExperimentConfig& cfg,
                                                  const protocol::SystemState& pre,
                                                  const protocol::SystemObservable& a,
                                                  const fock::PointerState& pointer,
                                                  const fock::PointerOperator& omega,
                                                  const fock::PointerOperator& readout,
                                                  OptimalRule rule) {
  if (cfg.mode == "standard") return std::nullopt;
  if (cfg.system.post) {
    auto post = protocol::SystemState::from_amplitudes(*cfg.system.post);
    try {
      protocol::weak_value(pre, post, a);
    } catch (const Error& e) {
      throw Error(e.kind(), std::string("system.post: ") + e.what());
    }
    return post;
  }
  Complex a_w;
  if (cfg.weak_value) {
    a_w = *cfg.weak_value;
  } else if (a.variance(pre) < 1e-12) {
    // Eigenstate: the only reachable weak value is <A>, with post = pre.
    return pre;
  } else if (rule == OptimalRule::Qfi) {
    const double mean = a.mean(pre);
    if (std::abs(mean) < 1e-12) {
      throw Error(ErrorKind::DegeneratePreselection,
                  "weak_value: <A> vanishes, the QFI-optimal weak value is unbounded");
    }
    a_w = a.second_moment(pre) / mean;
  } else {
    const metrology::SnrConfig snr{cfg.coupling.g > 0.0 ? cfg.coupling.g : 1.0,
                                   cfg.coupling.N, pre, a, pointer, omega, readout};
    try {
      a_w = metrology::max_snr_post(snr).optimal_Aw;
    } catch (const Error& e) {
      throw Error(e.kind(), std::string("weak_value: ") + e.what());
    }
  }
  try {
    return protocol::optimal_postselection(pre, a, a_w);
  } catch (const Error& e) {
    throw Error(e.kind(), std::string("weak_value: ") + e.what());
  }
}

}  // namespace

bool operator==(const SystemSpec& lhs, const SystemSpec& rhs) {
  auto same = [](const auto& x, const auto& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() && x == y;
  };
  if (lhs.observable != rhs.observable || !same(lhs.matrix, rhs.matrix) ||
      !same(lhs.pre, rhs.pre) || lhs.post.has_value() != rhs.post.has_value()) {
    return false;
  }
  return !lhs.post || same(*lhs.post, *rhs.post);
}

ExperimentConfig parse_config(const json& doc) {
  check_keys(doc, "config",
             {"schema", "system", "pointer", "coupling", "mode", "weak_value", "sweep", "mc"},
             {"schema", "system", "pointer", "coupling"});
  const std::string schema = get_string(doc["schema"], "schema");
  if (schema != kSchema) fail("schema", "expected \"" + std::string(kSchema) + "\"");
  ExperimentConfig cfg;
  cfg.system = parse_system(doc["system"], "system");
  cfg.pointer = parse_pointer(doc["pointer"], "pointer");
  cfg.coupling = parse_coupling(doc["coupling"], "coupling");
  if (doc.contains("mode")) {
    cfg.mode = get_string(doc["mode"], "mode");
    if (cfg.mode != "postselected" && cfg.mode != "standard") {
      fail("mode", "expected \"postselected\" or \"standard\"");
    }
  }
  if (doc.contains("weak_value")) {
    const json& w = doc["weak_value"];
    if (w.is_string()) {
      if (w.get<std::string>() != "optimal") fail("weak_value", "expected a complex or \"optimal\"");
    } else {
      cfg.weak_value = get_complex(w, "weak_value");
    }
  }
  if (cfg.system.post && cfg.weak_value) {
    fail("weak_value", "give either system.post or an explicit weak value, not both");
  }
  if (doc.contains("sweep")) cfg.sweep = parse_sweep(doc["sweep"], "sweep");
  if (doc.contains("mc")) cfg.mc = parse_mc(doc["mc"], "mc");
  return cfg;
}

ExperimentConfig parse_config_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ConfigParse, std::string("malformed JSON: ") + e.what());
  }
  return parse_config(doc);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigParse, path + ": cannot open config file");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config_text(buf.str());
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.what());
  }
}

json to_json(const ExperimentConfig& cfg) {
  json system{{"dim", cfg.system.pre.size()}, {"pre", emit_vector(cfg.system.pre)}};
  if (cfg.system.observable == "sigma_z") {
    system["observable"] = "sigma_z";
  } else {
    json rows = json::array();
    for (Eigen::Index r = 0; r < cfg.system.matrix.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < cfg.system.matrix.cols(); ++c) {
        row.push_back(emit_complex(cfg.system.matrix(r, c)));
      }
      rows.push_back(row);
    }
    system["observable"] = rows;
  }
  if (cfg.system.post) system["post"] = emit_vector(*cfg.system.post);

  json pointer{{"kind", cfg.pointer.kind}, {"truncation", cfg.pointer.truncation}};
  if (cfg.pointer.kind != "vacuum") pointer["alpha"] = emit_complex(cfg.pointer.alpha);
  if (cfg.pointer.kind == "squeezed_coherent") pointer["xi"] = emit_complex(cfg.pointer.xi);

  json doc{{"schema", kSchema},
           {"system", system},
           {"pointer", pointer},
           {"coupling",
            {{"g", cfg.coupling.g},
             {"omega", cfg.coupling.omega},
             {"readout", cfg.coupling.readout},
             {"N", cfg.coupling.N}}},
           {"mode", cfg.mode}};
  if (!cfg.system.post) {
    doc["weak_value"] = cfg.weak_value ? emit_complex(*cfg.weak_value) : json("optimal");
  }
  if (cfg.sweep) {
    doc["sweep"] = {{"parameter", cfg.sweep->parameter},
                    {"re_range", {cfg.sweep->re_lo, cfg.sweep->re_hi}},
                    {"im_range", {cfg.sweep->im_lo, cfg.sweep->im_hi}},
                    {"steps", cfg.sweep->steps}};
  }
  if (cfg.mc) doc["mc"] = {{"trials", cfg.mc->trials}, {"seed", cfg.mc->seed}};
  return doc;
}

ExperimentConfig default_config() {
  ExperimentConfig cfg;
  cfg.system.observable = "sigma_z";
  cfg.system.matrix = sigma_z();
  cfg.system.pre.resize(2);
  cfg.system.pre << 1.0 / std::numbers::sqrt2, 1.0 / std::numbers::sqrt2;
  cfg.pointer = {"squeezed_coherent", {0.0, 0.0}, {0.0, 1.0}, fock::kDefaultTruncation};
  cfg.coupling = {1e-5, "q", "p", 4'000'000};
  cfg.mode = "postselected";
  cfg.weak_value = Complex{0.0, 20.0};
  cfg.sweep = SweepSpec{};
  cfg.mc = McSpec{4'000'000, 20240601};
  return cfg;
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string text = to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

fock::PointerState build_pointer(const PointerSpec& spec) {
  fock::PointerState state = [&] {
    if (spec.kind == "vacuum") return fock::vacuum(spec.truncation);
    if (spec.kind == "coherent") return fock::coherent_state(spec.alpha, spec.truncation);
    return fock::squeezed_coherent_state(spec.xi, spec.alpha, spec.truncation);
  }();
  if (spec.truncation < kMinTruncation) {
    fail("pointer.truncation", "must be >= " + std::to_string(kMinTruncation) + ", got " +
                                   std::to_string(spec.truncation));
  }
  return state;
}

metrology::SnrConfig Experiment::snr_config() const {
  return {config.coupling.g, config.coupling.N, pre, a, pointer, omega, readout};
}

Experiment build_experiment(const ExperimentConfig& cfg, OptimalRule rule) {
  fock::PointerState pointer = build_pointer(cfg.pointer);
  const auto quads = fock::quadrature_ops(cfg.pointer.truncation);
  auto pick = [&](const std::string& name) { return name == "q" ? quads.q : quads.p; };
  auto pre = protocol::SystemState::from_amplitudes(cfg.system.pre);
  protocol::SystemObservable a(cfg.system.matrix);
  auto omega = pick(cfg.coupling.omega);
  auto readout = pick(cfg.coupling.readout);
  auto post = resolve_post(cfg, pre, a, pointer, omega, readout, rule);
  std::string label = describe_state(cfg.system.pre);
  return Experiment{cfg,   std::move(pre),     std::move(a),     std::move(pointer),
                    omega, readout,            std::move(post),  std::move(label)};
}

std::string describe_state(const CVector& amplitudes) {
  std::string out = "[";
  for (Eigen::Index i = 0; i < amplitudes.size(); ++i) {
    if (i) out += ", ";
    out += format_double(amplitudes[i].real());
    const double im = amplitudes[i].imag();
    out += im < 0 ? "-" : "+";
    out += format_double(std::abs(im)) + "i";
  }
  return out + "]";
}

}  // namespace wvalab::config
