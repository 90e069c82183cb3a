#include "wvalab/commands.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>
#include <vector>

#include <json.hpp>

#include "wvalab/mc.hpp"
#include "wvalab/metrology.hpp"
#include "wvalab/parallel.hpp"

namespace wvalab::cli {

namespace {

using fock::Complex;
using nlohmann::json;

constexpr double kSweepRadius = 2.0;

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json complex_json(Complex z) { return json{{"re", z.real()}, {"im", z.imag()}}; }

json error_json(const Error& e) {
  return json{{"kind", std::string(to_string(e.kind()))}, {"message", e.what()}};
}

// Writes `text` to --out, or stdout when no path is given.
void emit(const CommandOptions& opts, const std::string& text) {
  if (!opts.out) {
    std::cout << text;
    return;
  }
  std::ofstream f(*opts.out, std::ios::binary);
  if (!f) throw Error(ErrorKind::InvalidArgument, "cannot write " + *opts.out);
  f << text;
}

json header(const char* command, const config::ExperimentConfig& cfg,
            const config::Experiment* exp) {
  json h{{"command", command},
         {"config_hash", config::config_hash(cfg)},
         {"version", WVALAB_VERSION},
         {"preselection", config::describe_state(cfg.system.pre)},
         {"config", config::to_json(cfg)}};
  if (exp && exp->post) {
    h["postselection"] = config::describe_state(exp->post->amplitudes());
  }
  return h;
}

struct Check {
  std::string name;
  std::string status;  // pass | fail | skip
  double residual;
  double tolerance;
  std::string reason;  // why a check was skipped
};

void add_check(std::vector<Check>& checks, std::string name, double residual, double tol) {
  const bool ok = std::isfinite(residual) && residual <= tol;
  checks.push_back({std::move(name), ok ? "pass" : "fail", residual, tol, {}});
}

void add_skip(std::vector<Check>& checks, std::string name, std::string reason) {
  checks.push_back({std::move(name), "skip", std::nan(""), std::nan(""), std::move(reason)});
}

Complex fixed_weak_value(const config::Experiment& exp) {
  const auto& cfg = exp.config;
  if (cfg.mode != "postselected") {
    throw Error(ErrorKind::ConfigParse, "mode: sweep-squeeze needs postselected mode");
  }
  if (cfg.system.post) return protocol::weak_value(exp.pre, *exp.post, exp.a);
  if (!cfg.weak_value) {
    throw Error(ErrorKind::ConfigParse, "weak_value: sweep-squeeze needs a fixed weak value");
  }
  return *cfg.weak_value;
}

}  // namespace

int exit_code_for(const Error& e) {
  return is_physics_domain(e.kind()) ? kExitPhysics : kExitConfig;
}

int default_workers() {
  if (const char* env = std::getenv("WVALAB_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1 && v <= 1024) return static_cast<int>(v);
    throw Error(ErrorKind::ConfigParse, "WVALAB_WORKERS: expected a positive integer");
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

config::ExperimentConfig resolve_config(const CommandOptions& opts) {
  config::ExperimentConfig cfg =
      opts.config_path ? config::load_config(*opts.config_path) : config::default_config();
  if (opts.truncation) {
    if (*opts.truncation < 2 || *opts.truncation > 4096) {
      throw Error(ErrorKind::ConfigParse, "--truncation: must be in [2, 4096]");
    }
    cfg.pointer.truncation = *opts.truncation;
  }
  return cfg;
}

int cmd_validate(const CommandOptions& opts, std::ostream& log) {
  const auto cfg = resolve_config(opts);
  const auto exp = config::build_experiment(cfg);
  const int dim = exp.pointer.dim();
  std::vector<Check> checks;

  add_check(checks, "fock.pointer_norm", std::abs(exp.pointer.norm_squared() - 1.0),
            fock::kNormTolerance);
  add_check(checks, "fock.tail_mass", exp.pointer.tail_mass(), fock::kTailMassLimit);

  const auto quads = fock::quadrature_ops(dim);
  {
    const fock::CMatrix c = quads.q.matrix() * quads.p.matrix() - quads.p.matrix() * quads.q.matrix();
    const int k = dim - fock::kTailWindow;
    const fock::CMatrix dev =
        c.topLeftCorner(k, k) - Complex{0.0, 1.0} * fock::CMatrix::Identity(k, k);
    add_check(checks, "fock.canonical_commutator", dev.cwiseAbs().maxCoeff(), 1e-12);
  }
  {
    const auto pm = metrology::pointer_moments(exp.pointer, quads.q, quads.p);
    const double bound = 0.25 * (pm.kappa * pm.kappa + pm.covariance * pm.covariance);
    add_check(checks, "fock.robertson_schrodinger",
              std::max(0.0, bound - pm.var_omega * pm.var_readout), 1e-10);

    const auto grid = fock::QuadratureGrid::for_dim(dim);
    const auto rho = fock::wavefunction_p(exp.pointer, grid);
    std::vector<double> m1(rho.size());
    std::vector<double> m2(rho.size());
    const auto pts = grid.points();
    for (std::size_t i = 0; i < rho.size(); ++i) {
      m1[i] = pts[i] * rho[i];
      m2[i] = pts[i] * pts[i] * rho[i];
    }
    const double mean = grid.trapezoid(m1);
    const double var = grid.trapezoid(m2) - mean * mean;
    add_check(checks, "fock.grid_operator_moments",
              std::max(std::abs(mean - pm.mean_readout), std::abs(var - pm.var_readout)), 1e-8);
  }

  const auto joint = protocol::evolve_joint(exp.pre, exp.pointer, cfg.coupling.g, exp.a, exp.omega);
  add_check(checks, "protocol.joint_norm", std::abs(joint.amplitudes().squaredNorm() - 1.0),
            1e-10);
  {
    double total = 0.0;
    for (const auto& b : protocol::completed_basis(exp.pre)) {
      fock::CVector raw = fock::CVector::Zero(dim);
      for (int s = 0; s < joint.system_dim(); ++s) {
        raw += std::conj(b.amplitudes()[s]) * joint.block(s);
      }
      total += raw.squaredNorm();
    }
    add_check(checks, "protocol.completeness", std::abs(total - 1.0), 1e-10);
  }
  add_check(checks, "protocol.reduced_trace",
            std::abs(protocol::reduced_pointer_std(joint).trace().real() - 1.0), 1e-10);

  const auto sm = metrology::system_moments(exp.pre, exp.a);
  if (exp.post && sm.variance > 1e-12) {
    const Complex a_w = protocol::weak_value(exp.pre, *exp.post, exp.a);
    const auto rebuilt = protocol::optimal_postselection(exp.pre, exp.a, a_w);
    add_check(checks, "protocol.weak_value_roundtrip",
              std::abs(protocol::weak_value(exp.pre, rebuilt, exp.a) - a_w) /
                  std::max(1.0, std::abs(a_w)),
              1e-8);
  } else {
    add_skip(checks, "protocol.weak_value_roundtrip",
             exp.post ? "preselection is an eigenstate of A" : "standard mode");
  }

  std::string why_not;
  if (!(cfg.coupling.g > 0.0)) {
    why_not = "g = 0";
  } else if (sm.variance <= 1e-12) {
    why_not = "Var(A) vanishes";
  } else if (std::abs(sm.mean) <= 1e-12) {
    why_not = "<A> vanishes";
  }
  if (cfg.coupling.g > 0.0) {
    const metrology::SnrModel model(exp.snr_config());
    add_check(checks, "metrology.qfi_order", std::max(0.0, model.qfi_std() - model.max_qfi_post()),
              1e-9);
  } else {
    add_skip(checks, "metrology.qfi_order", why_not);
  }
  if (why_not.empty()) {
    const metrology::SnrModel model(exp.snr_config());
    const auto opt = model.max_snr_post();
    const double ratio = opt.max_snr / model.max_snr_std();
    add_check(checks, "metrology.ratio_consistency",
              std::abs(model.ratio_s_optimal() - ratio) / ratio, 1e-10);
    add_check(checks, "metrology.snr_upper_bound", std::max(0.0, opt.max_snr - opt.upper_bound),
              1e-9);
    add_check(checks, "metrology.optimal_weak_value_attains",
              std::abs(std::abs(model.snr_post(opt.optimal_Aw)) - opt.max_snr) / opt.max_snr,
              1e-9);
  } else {
    for (const char* n : {"metrology.ratio_consistency", "metrology.snr_upper_bound",
                          "metrology.optimal_weak_value_attains"}) {
      add_skip(checks, n, why_not);
    }
  }

  bool passed = true;
  json list = json::array();
  for (const auto& c : checks) {
    if (c.status == "fail") passed = false;
    char line[256];
    if (c.status == "skip") {
      std::snprintf(line, sizeof line, "SKIP %-40s %s\n", c.name.c_str(), c.reason.c_str());
    } else {
      std::snprintf(line, sizeof line, "%-4s %-40s residual=%.3e tol=%.1e\n",
                    c.status == "pass" ? "PASS" : "FAIL", c.name.c_str(), c.residual, c.tolerance);
    }
    log << line;
    json item{{"name", c.name}, {"status", c.status}};
    if (c.status == "skip") {
      item["reason"] = c.reason;
    } else {
      item["residual"] = c.residual;
      item["tolerance"] = c.tolerance;
    }
    list.push_back(item);
  }
  if (opts.out) {
    json report = header("validate", cfg, &exp);
    report["checks"] = list;
    report["passed"] = passed;
    emit(opts, report.dump(2) + "\n");
  }
  return passed ? kExitOk : kExitInvariant;
}

int cmd_sweep_squeeze(const CommandOptions& opts, std::ostream& log) {
  auto cfg = resolve_config(opts);
  if (!cfg.sweep) throw Error(ErrorKind::ConfigParse, "sweep: block is required for sweep-squeeze");
  if (opts.steps) {
    if (*opts.steps < 2 || *opts.steps > 4001) {
      throw Error(ErrorKind::ConfigParse, "--steps: must be in [2, 4001]");
    }
    cfg.sweep->steps = *opts.steps;
  }
  const auto exp = config::build_experiment(cfg);
  const Complex a_w = fixed_weak_value(exp);
  const auto& sw = *cfg.sweep;
  const int n = sw.steps;
  const int dim = cfg.pointer.truncation;

  std::vector<double> re(n);
  std::vector<double> im(n);
  for (int i = 0; i < n; ++i) {
    re[i] = sw.re_lo + (sw.re_hi - sw.re_lo) * i / (n - 1);
    im[i] = sw.im_lo + (sw.im_hi - sw.im_lo) * i / (n - 1);
  }
  // Warm the shared squeezer before fanning out.
  fock::Squeezer::for_dim(dim);

  const std::int64_t total = static_cast<std::int64_t>(n) * n;
  std::vector<std::string> cells(static_cast<std::size_t>(total));
  parallel_for(total, opts.workers, [&](std::int64_t k) {
    const double x = re[static_cast<std::size_t>(k % n)];
    const double y = im[static_cast<std::size_t>(k / n)];
    if (std::hypot(x, y) > kSweepRadius) return;
    config::PointerSpec spec = cfg.pointer;
    spec.kind = "squeezed_coherent";
    spec.xi = {x, y};
    metrology::SnrConfig snr = exp.snr_config();
    snr.pointer = fock::squeezed_coherent_state(spec.xi, spec.alpha, dim);
    cells[static_cast<std::size_t>(k)] =
        fmt17(metrology::SnrModel(snr).ratio_s_fixed_weak_value(a_w));
  });

  std::string text;
  text.reserve(static_cast<std::size_t>(total) * 64);
  text += "# config_hash=" + config::config_hash(cfg) + "\n";
  text += "# wvalab_version=" WVALAB_VERSION "\n";
  text += "# preselection=" + config::describe_state(cfg.system.pre) + "\n";
  text += "# weak_value=" + fmt17(a_w.real()) + (a_w.imag() < 0 ? "-" : "+") +
          fmt17(std::abs(a_w.imag())) + "i\n";
  text += "re_xi,im_xi,s\n";
  for (std::int64_t k = 0; k < total; ++k) {
    text += fmt17(re[static_cast<std::size_t>(k % n)]);
    text += ',';
    text += fmt17(im[static_cast<std::size_t>(k / n)]);
    text += ',';
    text += cells[static_cast<std::size_t>(k)];
    text += '\n';
  }
  emit(opts, text);
  log << "sweep-squeeze: " << total << " grid points written\n";
  return kExitOk;
}

int cmd_snr(const CommandOptions& opts, std::ostream& log) {
  const auto cfg = resolve_config(opts);
  std::optional<config::Experiment> built;
  try {
    built = config::build_experiment(cfg, config::OptimalRule::Snr);
  } catch (const Error& e) {
    if (!is_physics_domain(e.kind())) throw;
    json err = header("snr", cfg, nullptr);
    err["error"] = error_json(e);
    emit(opts, err.dump(2) + "\n");
    log << "error: " << to_string(e.kind()) << ": " << e.what() << "\n";
    return exit_code_for(e);
  }
  const config::Experiment& exp = *built;
  json report = header("snr", cfg, &exp);
  try {
    const metrology::SnrModel model(exp.snr_config());
    report["max_snr_std"] = model.max_snr_std();
    report["csc2_phi"] = metrology::csc2_phi(exp.pointer, exp.omega, exp.readout);
    report["s"] = model.ratio_s_optimal();
    if (exp.post) {
      const Complex a_w = protocol::weak_value(exp.pre, *exp.post, exp.a);
      report["weak_value"] = complex_json(a_w);
      report["ps_first_order"] = std::norm(protocol::overlap(*exp.post, exp.pre));
      report["snr_post"] = model.snr_post(a_w, std::norm(protocol::overlap(*exp.post, exp.pre)));
      report["snr_post_exact"] = metrology::snr_post_exact(exp.snr_config(), *exp.post);
      report["s_fixed_weak_value"] = model.snr_post(a_w, std::norm(protocol::overlap(*exp.post, exp.pre))) /
                                     model.max_snr_std();
    }
    try {
      const auto opt = model.max_snr_post();
      report["max_snr_post"] = opt.max_snr;
      report["upper_bound"] = opt.upper_bound;
      report["optimal_weak_value"] = complex_json(opt.optimal_Aw);
      report["phi"] = opt.phi;
      report["eta"] = opt.eta;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegeneratePreselection) throw;
      report["max_snr_post"] = nullptr;
      report["upper_bound"] = nullptr;
      report["max_snr_post_error"] = error_json(e);
    }
  } catch (const Error& e) {
    json err = header("snr", cfg, &exp);
    err["error"] = error_json(e);
    emit(opts, err.dump(2) + "\n");
    log << "error: " << to_string(e.kind()) << ": " << e.what() << "\n";
    return exit_code_for(e);
  }
  emit(opts, report.dump(2) + "\n");
  return kExitOk;
}

int cmd_qfi(const CommandOptions& opts, std::ostream& log) {
  auto cfg = resolve_config(opts);
  cfg.mode = "postselected";
  std::optional<config::Experiment> exp;
  try {
    exp = config::build_experiment(cfg, config::OptimalRule::Qfi);
    const auto r = metrology::qfi_report(exp->snr_config(), *exp->post);
    json report = header("qfi", cfg, &*exp);
    report["weak_value"] = complex_json(protocol::weak_value(exp->pre, *exp->post, exp->a));
    report["ps_first_order"] = std::norm(protocol::overlap(*exp->post, exp->pre));
    report["f_post"] = r.f_post;
    report["f_post_max"] = r.f_post_max;
    report["f_std"] = r.f_std;
    if (r.ratio) {
      report["ratio"] = *r.ratio;
    } else {
      report["ratio"] = nullptr;
      report["ratio_error"] =
          error_json(Error(ErrorKind::DegeneratePreselection,
                           "<A> vanishes: the standard QFI is zero and the ratio is undefined"));
    }
    report["f_all_probe"] = r.f_all_probe;
    emit(opts, report.dump(2) + "\n");
    return kExitOk;
  } catch (const Error& e) {
    if (!is_physics_domain(e.kind())) throw;
    json err = header("qfi", cfg, exp ? &*exp : nullptr);
    err["error"] = error_json(e);
    emit(opts, err.dump(2) + "\n");
    log << "error: " << to_string(e.kind()) << ": " << e.what() << "\n";
    return exit_code_for(e);
  }
}

int cmd_sample(const CommandOptions& opts, std::ostream& log) {
  const auto cfg = resolve_config(opts);
  if (!cfg.mc) throw Error(ErrorKind::ConfigParse, "mc: block is required for sample");
  if (!opts.out) throw Error(ErrorKind::ConfigParse, "--out: required for sample");
  const auto exp = config::build_experiment(cfg);
  const std::uint64_t seed = opts.seed.value_or(cfg.mc->seed);
  const auto grid = fock::QuadratureGrid::for_dim(exp.pointer.dim());

  const mc::RunConfig rc{exp.snr_config(), exp.post, cfg.mc->trials, seed, grid};
  const mc::RunSimulator sim(rc);
  const mc::RunRecord rec = sim.run(seed, opts.workers);
  const double slope = mc::amr_slope(rc.cfg, rc.post);
  const double baseline = fock::expectation(exp.pointer, exp.readout).real();

  json report = header("sample", cfg, &exp);
  report["seed"] = seed;
  report["trials"] = rec.trials;
  report["accepted"] = rec.accepted;
  report["g_true"] = rec.g_true;
  report["acceptance_rate"] = static_cast<double>(rec.accepted) / static_cast<double>(rec.trials);
  report["acceptance_prob_exact"] = rec.acceptance_prob;
  report["acceptance_sigma"] =
      std::sqrt(rec.acceptance_prob * (1.0 - rec.acceptance_prob) / static_cast<double>(rec.trials));
  report["amr_slope"] = slope;

  auto estimator_json = [](const mc::EstimatorReport& r) {
    return json{{"g_hat", r.g_hat},
                {"std_err", r.std_err},
                {"empirical_snr", r.empirical_snr},
                {"n_effective", r.n_effective}};
  };
  if (rec.accepted >= 2) {
    const auto amr = mc::amr_estimate(rec, slope, baseline);
    report["amr"] = estimator_json(amr);
    try {
      const auto family = mc::outcome_density_family(rc.cfg, rc.post, grid);
      report["mle"] = estimator_json(mc::mle_estimate(rec, family, grid, mc::mle_window(amr)));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::MaximumOnBoundary) throw;
      report["mle"] = nullptr;
      report["mle_error"] = error_json(e);
    }
  } else {
    report["amr"] = nullptr;
    report["mle"] = nullptr;
  }
  if (cfg.coupling.g > 0.0) {
    const metrology::SnrModel model(rc.cfg);
    if (exp.post) {
      const Complex a_w = protocol::weak_value(exp.pre, *exp.post, exp.a);
      report["weak_value"] = complex_json(a_w);
      report["snr_post_analytic"] = model.snr_post(a_w, std::norm(protocol::overlap(*exp.post, exp.pre)));
    } else {
      report["snr_std_analytic"] = model.shift(exp.a.mean(exp.pre)) *
                                   std::sqrt(static_cast<double>(cfg.coupling.N)) /
                                   std::sqrt(model.pointer().var_readout);
    }
  }

  std::string csv;
  csv.reserve(rec.outcomes.size() * 24 + 128);
  csv += "# config_hash=" + config::config_hash(cfg) + "\n";
  csv += "# seed=" + std::to_string(seed) + "\n";
  csv += "p\n";
  for (double x : rec.outcomes) {
    csv += fmt17(x);
    csv += '\n';
  }
  const std::string outcomes_path = *opts.out + ".outcomes.csv";
  {
    std::ofstream f(outcomes_path, std::ios::binary);
    if (!f) throw Error(ErrorKind::InvalidArgument, "cannot write " + outcomes_path);
    f << csv;
  }
  emit(opts, report.dump(2) + "\n");
  log << "sample: " << rec.accepted << " of " << rec.trials << " trials accepted\n";
  return kExitOk;
}

}  // namespace wvalab::cli
