#include "wglab/experiment.hpp"

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <memory>
#include <random>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>
#include <json.hpp>

#include "wglab/evolution.hpp"
#include "wglab/io.hpp"
#include "wglab/norms.hpp"
#include "wglab/report.hpp"
#include "wglab/resolvent.hpp"
#include "wglab/spectral.hpp"

namespace wglab {

using json = nlohmann::json;
namespace fs = std::filesystem;

bool ResultBundle::all_pass() const {
  if (!error.empty() || verdicts.empty()) return false;
  return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
}

const Verdict* ResultBundle::find(const std::string& check) const {
  for (const auto& v : verdicts)
    if (v.check == check) return &v;
  return nullptr;
}

std::string verdicts_to_json(const std::vector<Verdict>& vs) {
  json a = json::array();
  for (const auto& v : vs) {
    json j = {{"label", v.label}, {"check", v.check}, {"pass", v.pass}, {"detail", v.detail}};
    j["value"] = std::isfinite(v.value) ? json(v.value) : json(nullptr);
    j["threshold"] = std::isfinite(v.threshold) ? json(v.threshold) : json(nullptr);
    a.push_back(j);
  }
  return json{{"verdicts", a}}.dump(2) + "\n";
}

std::vector<Verdict> verdicts_from_json(const std::string& text) {
  std::vector<Verdict> out;
  try {
    json j = json::parse(text);
    for (const auto& v : j.at("verdicts")) {
      Verdict r;
      r.label = v.at("label").get<std::string>();
      r.check = v.at("check").get<std::string>();
      r.pass = v.at("pass").get<bool>();
      r.detail = v.value("detail", "");
      r.value = v.at("value").is_number() ? v.at("value").get<double>() : std::nan("");
      r.threshold = v.at("threshold").is_number() ? v.at("threshold").get<double>() : std::nan("");
      out.push_back(r);
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::MissingArtifact, std::string("malformed verdicts.json: ") + e.what());
  }
  return out;
}

namespace {

std::string g17(double v) { return fmt::format("{:.17g}", v); }

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

class Run {
 public:
  Run(const ExperimentConfig& c, ResultBundle& b, BundleWriter* w) : c_(c), b_(b), w_(w) {}

  void text(const std::string& name, const std::string& content) {
    b_.files[name] = content;
    if (w_) w_->add(name, content);
  }
  void field(const std::string& name, const GridFunction& f) {
    if (w_) w_->add_field(name, f);
  }
  void verdict(std::string label, std::string check, bool pass, double value, double threshold, std::string detail = "") {
    b_.verdicts.push_back({std::move(label), std::move(check), pass, value, threshold, std::move(detail)});
  }
  // Pass when value <= threshold.
  void at_most(std::string label, std::string check, double value, double threshold, std::string detail = "") {
    verdict(std::move(label), std::move(check), value <= threshold, value, threshold, std::move(detail));
  }
  void at_least(std::string label, std::string check, double value, double threshold, std::string detail = "") {
    verdict(std::move(label), std::move(check), value >= threshold, value, threshold, std::move(detail));
  }
  void plots(const std::vector<PlotSpec>& ps) {
    text("plot.json", plots_to_json(ps));
    for (const auto& p : ps) text(p.name + ".svg", render_svg(p));
  }

  const ExperimentConfig& c_;
  ResultBundle& b_;
  BundleWriter* w_;
};

GridSpec doubled(const GridSpec& g) {
  GridSpec d = g;
  d.extent_x *= 2.0;
  return d;
}

DirichletOperator make_operator(const DomainPtr& d, const PotentialField& V, int ell_x, int k_y) {
  if (ell_x == 0 && k_y == 0) return assemble_hamiltonian(d, V);
  return assemble_sector(d, ell_x, k_y, V);
}

double global_threshold(const WaveguideDomain& d) { return essential_threshold(tail_modes(d, 1, 0)); }

// ---------------------------------------------------------------------------

void run_audit(Run& r) {
  const ExperimentConfig& c = r.c_;
  DomainPtr d = build_domain(c.profile, c.grid);
  RepulsivityReport rep = audit_repulsivity(*d);
  FlatTailReport tail = audit_flat_tail(*d);
  PotentialReport pot = audit_potential(c.potential, *d);
  const double thr = global_threshold(*d);

  json j = {{"cells", d->size()},
            {"profile", c.profile.id()},
            {"potential", c.potential.id()},
            {"threshold", thr},
            {"repulsive", rep.verdict},
            {"min_slack", rep.min_slack},
            {"violating_fraction", rep.violating_fraction},
            {"boundary_samples", rep.samples},
            {"flat_tail", tail.holds},
            {"flat_tail_M", tail.M},
            {"flat_tail_analytic_M", tail.analytic_M},
            {"potential_nonneg", pot.nonneg},
            {"potential_repulsive", pot.radial_repulsive},
            {"potential_min", pot.min_value},
            {"potential_min_slack", pot.min_slack}};
  r.text("domain.json", j.dump(2) + "\n");

  fs::path tmp = fs::temp_directory_path() / fmt::format("wglab-mask-{}.bin", static_cast<long>(::getpid()));
  write_mask(tmp.string(), *d);
  std::string mask = read_file(tmp);
  fs::remove(tmp);
  if (r.w_) r.w_->add("mask.bin", mask);

  std::string detail = rep.verdict ? fmt::format("repulsive, slack {:g}", rep.min_slack)
                                   : fmt::format("not repulsive, slack {:g} on {:.3g} of the boundary", rep.min_slack,
                                                 rep.violating_fraction);
  r.verdict("repulsivity", "boundary-slack", rep.verdict, rep.min_slack, -kTolGeom, detail);
  if (c.potential.kind != PotentialField::Kind::Zero)
    r.verdict("repulsivity", "potential-repulsive", pot.nonneg && pot.radial_repulsive, pot.min_slack, 0.0,
              pot.nonneg ? "" : "potential takes negative values");
}

// ---------------------------------------------------------------------------

// Random complex field with a random radial envelope and random sparsity.
GridFunction random_field(const DomainPtr& d, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  const double L = d->spec().extent_x;
  const double center = ud(rng) * L;
  const double width = 0.05 * L + ud(rng) * L;
  const double decay = ud(rng) < 0.5 ? 0.0 : ud(rng) * 3.0;
  const double keep = 0.2 + 0.8 * ud(rng);
  GridFunction f(d);
  for (std::size_t cell = 0; cell < d->size(); ++cell) {
    const double rr = d->radius(cell);
    const double env = std::exp(-std::pow((rr - center) / width, 2)) + std::exp(-decay * rr);
    if (ud(rng) > keep) continue;
    f.values[cell] = env * Complex(nd(rng), nd(rng));
  }
  return f;
}

void run_norms(Run& r) {
  const ExperimentConfig& c = r.c_;
  DomainPtr d = build_domain(c.profile, c.grid);
  std::mt19937_64 rng(c.seed);
  std::vector<GridFunction> F;
  for (int i = 0; i < c.norms.fields; ++i) F.push_back(random_field(d, rng));

  std::string norms_csv = "field,X,X1,X2,Xstar\n";
  for (std::size_t i = 0; i < F.size(); ++i) {
    NormReport n = norm_report(F[i]);
    norms_csv += fmt::format("{},{},{},{},{}\n", i, g17(n.X), g17(n.X1), g17(n.X2), g17(n.Xstar));
  }
  r.text("norms.csv", norms_csv);

  std::string csv = "field," + margin_csv_header() + "\n";
  std::map<std::string, double> worst;  // min margin / rhs per inequality
  std::size_t checks = 0;
  auto record = [&](std::size_t i, const MarginReport& m) {
    csv += fmt::format("{},{}\n", i, margin_csv_row(m));
    const double q = m.rhs > 0.0 ? m.margin / m.rhs : (m.margin >= 0.0 ? 0.0 : -1.0);
    auto [it, fresh] = worst.emplace(inequality_name(m.id), q);
    if (!fresh) it->second = std::min(it->second, q);
    ++checks;
  };
  const std::size_t N = F.size();
  for (std::size_t i = 0; i < N; ++i) {
    const GridFunction &f = F[i], &g = F[(i + 1) % N], &h = F[(i + 2) % N];
    record(i, check_inequality(InequalityId::MCin1, {&f, &g}));
    record(i, check_inequality(InequalityId::MCin4, {&f, &g, &h}));
    record(i, check_inequality(InequalityId::Comparnorm, {&f}));
    for (double R : c.norms.R) {
      InequalityParams p;
      p.R = R;
      record(i, check_inequality(InequalityId::MCin3, {&f, &g}, p));
      record(i, check_inequality(InequalityId::MCin2, {&f, &g}, p));
      record(i, check_inequality(InequalityId::MCtoweightX, {&f}, p));
      record(i, check_inequality(InequalityId::MCtoweightX1, {&f}, p));
      record(i, check_inequality(InequalityId::WeighttoMC, {&f}, p));
      for (double s : c.norms.s) {
        p.s = s;
        record(i, check_inequality(InequalityId::MCtoweightgen, {&f}, p));
      }
    }
    record(i, check_inequality(InequalityId::Weight1, {&f}));
  }
  r.text("margins.csv", csv);

  double overall = 0.0;
  PlotSeries bars{"min margin / rhs", {}, {}, true};
  json summary = json::object();
  int k = 0;
  for (const auto& [name, q] : worst) {
    overall = std::min(overall, q);
    summary[name] = q;
    bars.x.push_back(k++);
    bars.y.push_back(q);
  }
  r.text("norm_summary.json", json{{"fields", N}, {"checks", checks}, {"min_relative_margin", summary}}.dump(2) + "\n");
  r.plots({PlotSpec{"margins", "smallest relative margin per inequality", "inequality (alphabetical)", "margin / rhs", false,
                    false, {bars}, {{-c.tol.margin, "tolerance"}}, {}}});
  r.at_least("norm-inequalities", "min-relative-margin", overall, -c.tol.margin,
             fmt::format("{} checks on {} fields", checks, N));
}

// ---------------------------------------------------------------------------

struct SweepRun {
  double threshold = 0.0;
  std::vector<double> lambdas, eps;
  std::vector<double> embedded;
  SweepSummary summary;
  std::size_t cells = 0;
};

SweepRun sweep_on(const ExperimentConfig& c, const GridSpec& grid) {
  SweepRun s;
  DomainPtr d = build_domain(c.profile, grid);
  s.cells = d->size();
  DirichletOperator H = make_operator(d, c.potential, c.sweep.ell_x, c.sweep.k_y);
  s.threshold = global_threshold(*d);
  const double unit = c.sweep.scale_by_threshold ? s.threshold : 1.0;
  for (double l : c.sweep.lambda) s.lambdas.push_back(l * unit);
  for (double e : c.sweep.eps) s.eps.push_back(e * unit);
  if (c.sweep.add_embedded) {
    const double sector = c.sweep.k_y == 0 ? s.threshold : essential_threshold(tail_modes(*d, 1, c.sweep.k_y));
    ScanOptions so;
    so.jobs = c.jobs;
    EigenReport rep = classify_embedded(scan_eigenvalues(H, s.threshold, sector, so), s.threshold);
    for (const auto& e : rep.entries)
      if (e.embedded) s.embedded.push_back(e.value);
    s.lambdas.insert(s.lambdas.end(), s.embedded.begin(), s.embedded.end());
    std::sort(s.lambdas.begin(), s.lambdas.end());
  }
  std::vector<GridFunction> sources;
  for (const auto& spec : make_source_ensemble(c.sweep.sources, c.sweep.support_radius, c.seed)) sources.push_back(spec.sample(d));
  s.summary = sweep_uniformity(H, s.lambdas, s.eps, sources, c.jobs, {}, c.sweep.weight_eps);
  return s;
}

void run_sweep(Run& r) {
  const ExperimentConfig& c = r.c_;
  SweepRun s = sweep_on(c, c.grid);
  const SweepSummary& sw = s.summary;

  std::string csv = sweep_csv_header() + "\n";
  for (const auto& rec : sw.records) csv += sweep_csv_row(rec) + "\n";
  r.text("sweep.csv", csv);

  // sup over sources per (lambda, eps)
  std::map<std::pair<double, double>, double> sup;
  for (const auto& rec : sw.records)
    if (rec.error.empty()) sup[{rec.lambda, rec.eps}] = std::max(sup[{rec.lambda, rec.eps}], rec.ratio);
  const double e_lo = *std::min_element(s.eps.begin(), s.eps.end());
  const double e_hi = *std::max_element(s.eps.begin(), s.eps.end());
  PlotSeries trend{"trend", {}, {}, true};
  json trend_j = json::array();
  for (double l : s.lambdas) {
    double a = sup[{l, e_hi}], b = sup[{l, e_lo}];
    double t = a > 0.0 ? b / a : std::nan("");
    trend.x.push_back(l / s.threshold);
    trend.y.push_back(t);
    trend_j.push_back({{"lambda", l}, {"trend", num(t)}});
  }
  std::vector<double> eps_sorted = s.eps;
  std::sort(eps_sorted.begin(), eps_sorted.end());
  PlotSeries all{"sup over lambda", {}, {}, true}, at{fmt::format("lambda = {:.4g}", sw.trend_lambda), {}, {}, true};
  for (double e : eps_sorted) {
    double m = 0.0;
    for (double l : s.lambdas) m = std::max(m, sup[{l, e}]);
    all.x.push_back(e / s.threshold);
    all.y.push_back(m);
    at.x.push_back(e / s.threshold);
    at.y.push_back(sup[{sw.trend_lambda, e}]);
  }
  const double n = c.grid.n;
  const double cap = c.tol.max_ratio > 0.0 ? c.tol.max_ratio : 5000.0 * n * n;

  json j = {{"cells", s.cells},
            {"threshold", s.threshold},
            {"lambdas", s.lambdas},
            {"eps", s.eps},
            {"embedded", s.embedded},
            {"max_ratio", sw.max_ratio},
            {"trend", sw.trend},
            {"trend_lambda", sw.trend_lambda},
            {"source_trend", sw.source_trend},
            {"max_residual", sw.max_residual},
            {"max_im_defect", sw.max_im_defect},
            {"max_re_defect", sw.max_re_defect},
            {"failures", sw.failures},
            {"trend_by_lambda", trend_j}};

  const bool uniform = c.sweep.expect == "uniform";
  if (uniform) {
    r.at_most("resolvent-uniformity", "max-ratio", sw.max_ratio, cap, "sup over the z grid and the source ensemble");
    r.at_most("resolvent-uniformity", "eps-trend", sw.trend, c.tol.trend,
              fmt::format("worst at lambda = {:.6g}", sw.trend_lambda));
  } else {
    r.at_least("embedded-resonance", "eps-trend", sw.trend, c.tol.contrast_trend,
               fmt::format("worst at lambda = {:.6g}", sw.trend_lambda));
  }
  r.at_most("energy-identities", "relative-defect", std::max(sw.max_im_defect, sw.max_re_defect), c.tol.identity,
            fmt::format("imaginary {:.3g}, real {:.3g}", sw.max_im_defect, sw.max_re_defect));
  r.at_most("resolvent-solves", "failed-points", static_cast<double>(sw.failures), 0.0,
            fmt::format("max residual {:.3g}", sw.max_residual));

  if (c.extent_doubling) {
    SweepRun s2 = sweep_on(c, doubled(c.grid));
    const double change = sweep_sensitivity(sw, s2.summary);
    j["doubled_extent"] = 2.0 * c.grid.extent_x;
    j["doubling_change"] = change;
    j["doubled_max_ratio"] = s2.summary.max_ratio;
    j["doubled_trend"] = s2.summary.trend;
    r.at_most("truncation", "extent-doubling", change, c.tol.doubling,
              fmt::format("extent {:g} against {:g}", c.grid.extent_x, 2.0 * c.grid.extent_x));
  }
  r.text("sweep_summary.json", j.dump(2) + "\n");

  std::vector<PlotSpec> ps;
  ps.push_back({"ratio_vs_eps", "resolvent ratio against the imaginary part", "eps / lambda_1^2", "ratio", true, true,
                {all, at}, uniform ? std::vector<PlotLine>{{cap, "5000 n^2"}} : std::vector<PlotLine>{}, {}});
  ps.push_back({"trend", "ratio(eps_min) / ratio(eps_max)", "lambda / lambda_1^2", "trend", false, true, {trend},
                {{uniform ? c.tol.trend : c.tol.contrast_trend, uniform ? "uniform bound" : "blow-up bound"}}, {}});
  r.plots(ps);
}

// ---------------------------------------------------------------------------

void run_spectrum(Run& r) {
  const ExperimentConfig& c = r.c_;
  const SpectrumSettings& sp = c.spectrum;
  DomainPtr d = build_domain(c.profile, c.grid);
  const double global = global_threshold(*d);
  const double unit = sp.scale_by_threshold ? global : 1.0;
  const double a = sp.a * unit, b = sp.b * unit;
  ScanOptions so;
  so.shifts = sp.shifts;
  so.krylov_dim = sp.krylov_dim;
  so.tol = sp.tol;
  so.jobs = c.jobs;
  so.seed = 7 + c.seed;
  EigenReport rep = scan_domain(c.profile, c.grid, c.potential, sp.ell_x, sp.k_y, a, b, so);
  auto bound = rep.bound_states();

  std::string csv = "value,residual,r90,localized,embedded,stable,doubled_value,ell_x,k_y\n";
  for (const auto& e : rep.entries)
    csv += fmt::format("{},{},{},{},{},{},{},{},{}\n", g17(e.value), g17(e.residual), g17(e.r90), int(e.localized),
                       int(e.embedded), int(e.stable), g17(e.doubled_value), e.ell_x, e.k_y);
  r.text("spectrum.csv", csv);

  json j = {{"window", {a, b}},
            {"extent_x", rep.extent_x},
            {"doubled_extent", rep.doubled_extent},
            {"threshold", rep.threshold},
            {"sector_threshold", rep.sector_threshold},
            {"window_count", rep.window_count},
            {"bound_states", bound.size()},
            {"certificate", rep.certificate},
            {"certificate_note", rep.certificate_note},
            {"profile", rep.profile_id},
            {"potential", rep.potential_id}};

  if (sp.expect == "absence") {
    r.verdict("absence-of-eigenvalues", "certificate", rep.certificate && bound.empty(), static_cast<double>(bound.size()), 0.0,
              rep.certificate_note);
  } else if (sp.expect == "bound-state") {
    const EigenEntry* e = nullptr;
    for (const EigenEntry* x : bound)
      if (x->value < rep.threshold) {
        e = x;
        break;
      }
    r.at_least("bound-state", "count-below-threshold", e ? 1.0 : 0.0, 1.0);
    if (e) {
      r.at_most("bound-state", "residual", e->residual, c.tol.residual, fmt::format("E = {:.10g}", e->value));
      r.at_most("bound-state", "box-doubling", std::abs(e->doubled_value - e->value) / e->value, c.tol.eig_doubling,
                fmt::format("E = {:.10g} at extent {:g}, {:.10g} at {:g}", e->value, rep.extent_x, e->doubled_value,
                            rep.doubled_extent));
    }
  } else if (sp.expect == "embedded") {
    const EigenEntry* e = nullptr;
    for (const EigenEntry* x : bound)
      if (x->embedded) {
        e = x;
        break;
      }
    r.verdict("embedded-eigenvalue", "embedded-count", e != nullptr, e ? 1.0 : 0.0, 1.0,
              e ? fmt::format("E = {:.10g} in ({:.6g}, {:.6g})", e->value, rep.threshold, rep.sector_threshold) : "");
    if (e) r.at_most("embedded-eigenvalue", "residual", e->residual, c.tol.residual);
  } else if (sp.expect == "none-below-threshold") {
    DirichletOperator H = make_operator(d, c.potential, sp.ell_x, sp.k_y);
    const int below = count_below(H.S, global * (1.0 - 1e-9));
    j["count_below_threshold"] = below;
    r.at_most("absence-below-threshold", "inertia-count", below, 0.0, "negative inertia of S - lambda_1^2");
  }

  if (sp.dense_check) {
    DirichletOperator H = make_operator(d, c.potential, sp.ell_x, sp.k_y);
    if (H.dim() > 4000) {
      r.verdict("eigen-oracle", "dense-agreement", false, std::nan(""), 0.01, "operator too large for the dense oracle");
    } else {
      Eigen::MatrixXd A = Eigen::MatrixXd(Eigen::SparseMatrix<double>(H.S));
      VecD ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(A, Eigen::EigenvaluesOnly).eigenvalues();
      std::vector<double> in;
      for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (ev[i] >= a && ev[i] < b) in.push_back(ev[i]);
      double worst = in.size() == rep.entries.size() ? 0.0 : std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < std::min(in.size(), rep.entries.size()); ++i)
        worst = std::max(worst, std::abs(rep.entries[i].value - in[i]) / std::abs(in[i]));
      j["dense_values"] = in;
      r.at_most("eigen-oracle", "dense-agreement", worst, 0.01,
                fmt::format("{} dense, {} scanned in the window", in.size(), rep.entries.size()));
    }
  }
  r.text("spectrum.json", j.dump(2) + "\n");

  PlotSpec ladder{"ladder", "eigenvalues in the window", "", "E", false, false, {}, {}, {}};
  for (const auto& e : rep.entries) {
    std::string name = e.embedded ? "embedded" : (e.localized && e.stable ? "bound state" : "");
    ladder.series.push_back({"", {0.0, 1.0}, {e.value, e.value}, false});
    if (!name.empty()) ladder.series.back().name = fmt::format("{} {:.6g}", name, e.value);
  }
  ladder.hlines.push_back({rep.threshold, "lambda_1^2"});
  ladder.bands.push_back({rep.sector_threshold, std::max(b, rep.sector_threshold * 1.05), "essential spectrum of the sector"});
  r.plots({ladder});
}

// ---------------------------------------------------------------------------

GridFunction make_datum(const ExperimentConfig& c, const DomainPtr& d, const DirichletOperator& H) {
  const DatumSettings& ds = c.evolve.datum;
  if (ds.kind == "eigenstate") {
    ScanOptions so;
    so.jobs = c.jobs;
    EigenReport rep = scan_eigenvalues(H, 0.0, global_threshold(*d), so);
    for (const auto& e : rep.entries)
      if (e.localized) {
        return GridFunction(d, e.vector.cast<Complex>());
      }
    fail(ErrorCode::InvalidArgument, "no localized eigenstate below the sector threshold for the eigenstate datum");
  }
  const ProfileSpec& prof = c.profile;
  const CrossSection& cs = prof.section;
  const int m = c.grid.m;
  const bool radial_y = c.grid.mode == GridMode::RadialXRadialY;
  return sample(d, [&](const CellPoint& p) -> Complex {
    const double g = prof.g(p.r);
    double y_part = 1.0;
    if (cs.kind == CrossSection::Kind::Disk) {
      double rho = 0.0;
      if (radial_y) rho = p.y[0];
      else
        for (int k = 0; k < m; ++k) rho += p.y[k] * p.y[k];
      rho = radial_y ? rho : std::sqrt(rho);
      const double s = rho / (g * cs.radius);
      y_part = s < 1.0 ? std::cos(0.5 * kPi * s) : 0.0;
    } else {
      for (int k = 0; k < m; ++k) {
        const double s = (p.y[k] / g - cs.a) / (cs.b - cs.a);
        y_part *= (s > 0.0 && s < 1.0) ? std::sin(ds.y_mode * kPi * s) : 0.0;
      }
    }
    const double z = (p.r - ds.center) / ds.width;
    return std::exp(-0.5 * z * z) * y_part;
  });
}

struct EvolveRun {
  Trajectory traj;
  GridFunction f;
  std::size_t cells = 0;
};

EvolveRun evolve_on(const ExperimentConfig& c, const GridSpec& grid) {
  const EvolveSettings& e = c.evolve;
  EvolveRun out;
  DomainPtr d = build_domain(c.profile, grid);
  out.cells = d->size();
  DirichletOperator H = assemble_hamiltonian(d, c.potential);
  out.f = make_datum(c, d, H);
  EvolveOptions opt;
  opt.snapshot_every = e.snapshot_every;
  opt.trace.eps = e.eps;
  opt.trace.half_derivative = e.half_derivative || e.strichartz;
  opt.trace.strichartz = e.strichartz;
  if (c.kind == ExperimentKind::Duhamel) {
    const GridFunction f = out.f;
    const double s0 = e.source_T;
    SourceFn F = [f, s0](double s) {
      GridFunction g = f;
      const double w = s < s0 ? std::pow(std::cos(0.5 * kPi * s / s0), 2) : 0.0;
      g.values *= w;
      return g;
    };
    out.traj = duhamel_evolve(H, F, e.T, e.dt, opt);
  } else if (e.flow == "wave") {
    WaveOptions wo;
    wo.route = e.wave_route == "spectral" ? WaveRoute::Spectral : e.wave_route == "leapfrog" ? WaveRoute::Leapfrog : WaveRoute::Auto;
    out.traj = evolve_wave(H, e.mu, out.f, e.T, e.dt, opt, wo);
  } else {
    out.traj = evolve_schrodinger(H, out.f, e.T, e.dt, opt);
  }
  return out;
}

void run_evolve(Run& r) {
  const ExperimentConfig& c = r.c_;
  const EvolveSettings& e = c.evolve;
  EvolveRun run = evolve_on(c, c.grid);
  const Trajectory& tr = run.traj;
  const double T = tr.final_time(), Th = 0.5 * T;
  const bool duhamel = c.kind == ExperimentKind::Duhamel;
  const std::string family = duhamel ? "inhomogeneous-smoothing" : e.flow + "-smoothing";

  json j = {{"scheme", tr.scheme}, {"cells", run.cells}, {"dt", tr.dt}, {"steps", tr.steps}, {"T", T}};
  PlotSpec plot{"trace", "local smoothing trace", "T", "S1(T)", false, false, {}, {}, {}};
  json per_eps = json::array();
  for (double eps : e.eps) {
    EvolutionTrace s = smoothing_trace(tr, eps);
    r.text(fmt::format("trace_eps{:g}.csv", eps), trace_csv_header() + "\n" + trace_csv_rows(tr, eps));
    const std::size_t kh = s.index(Th), kT = s.index(T);
    const double growth = (s.S1[kT] - s.S1[kh]) / s.S1[kh];
    json q = {{"eps", eps}, {"S1_half", s.S1[kh]}, {"S1_T", s.S1[kT]}, {"growth", num(growth)}, {"Sh_T", s.Sh[kT]},
              {"S2_T", s.S2[kT]}, {"S3_T", s.S3[kT]}};
    plot.series.push_back({fmt::format("eps = {:g}", eps), s.T, s.S1, false});

    if (duhamel) {
      const double rh = duhamel_ratio(tr, eps, Th), rT = duhamel_ratio(tr, eps, T);
      q["ratio_half"] = rh;
      q["ratio_T"] = rT;
      r.at_most(family, fmt::format("ratio-growth/eps={:g}", eps), rT / rh - 1.0, c.tol.plateau,
                fmt::format("ratio {:.6g} at T/2, {:.6g} at T", rh, rT));
    } else if (e.expect == "dispersive") {
      r.at_most(family, fmt::format("plateau/eps={:g}", eps), growth, c.tol.plateau,
                fmt::format("S1 {:.6g} at T = {:g}, {:.6g} at T = {:g}", s.S1[kh], Th, s.S1[kT], T));
    } else if (e.expect == "trapped") {
      const double slope = std::pow(weighted_norm_fixed(run.f, 1.0 + eps), 2);
      double dev = 0.0;
      for (std::size_t k = 0; k < s.T.size(); ++k) dev = std::max(dev, std::abs(s.S1[k] - slope * s.T[k]));
      dev /= slope * T;
      q["slope"] = slope;
      q["linear_deviation"] = dev;
      r.at_most("stationary-modulus", fmt::format("linear-growth/eps={:g}", eps), dev, c.tol.stationary,
                fmt::format("slope |<x>^(-1-eps) f|^2 = {:.10g}", slope));
    }
    per_eps.push_back(q);
  }
  j["traces"] = per_eps;

  if (!duhamel) {
    if (e.flow == "schrodinger") {
      j["mass_drift"] = tr.mass_drift();
      r.at_most("numerics", "mass-drift", tr.mass_drift(), c.tol.mass_drift);
    } else {
      j["energy_drift"] = tr.energy_drift();
      r.at_most("numerics", "energy-drift", tr.energy_drift(), c.tol.energy_drift);
    }
  }
  if (e.strichartz) {
    const double eps = e.eps.front();
    StrichartzResult a = strichartz_norm(tr, c.potential, eps, Th), b = strichartz_norm(tr, c.potential, eps, T);
    j["strichartz"] = {{"St_half", a.St}, {"St_T", b.St}, {"ratio_half", a.ratio}, {"ratio_T", b.ratio},
                       {"v_factor", a.v_factor}, {"data_norm", a.data_norm}};
    r.at_most("endpoint-strichartz", "ratio-growth", b.ratio / a.ratio - 1.0, c.tol.strichartz_plateau,
              fmt::format("ratio {:.6g} at T/2, {:.6g} at T", a.ratio, b.ratio));
  }
  if (c.extent_doubling) {
    EvolveRun run2 = evolve_on(c, doubled(c.grid));
    double change = 0.0;
    for (double eps : e.eps) {
      EvolutionTrace s1 = smoothing_trace(tr, eps), s2 = smoothing_trace(run2.traj, eps);
      const std::size_t k1 = s1.index(T), k2 = s2.index(T);
      change = std::max(change, std::abs(s2.S1[k2] - s1.S1[k1]) / s1.S1[k1]);
      if (e.strichartz) change = std::max(change, std::abs(s2.St(k2) - s1.St(k1)) / s1.St(k1));
    }
    j["doubled_extent"] = 2.0 * c.grid.extent_x;
    j["doubling_change"] = change;
    r.at_most("truncation", "extent-doubling", change, c.tol.doubling,
              fmt::format("extent {:g} against {:g}", c.grid.extent_x, 2.0 * c.grid.extent_x));
  }
  r.text("evolution.json", j.dump(2) + "\n");
  r.field("final_state.wglf", tr.final_state());
  r.plots({plot});
}

// ---------------------------------------------------------------------------

void run_flat(Run& r) {
  const ExperimentConfig& c = r.c_;
  const FlatSettings& fl = c.flat;
  DomainPtr d = build_domain(c.profile, c.grid);
  ModeBasis mb = tail_modes(*d, fl.modes);
  std::map<std::int64_t, double> phi;
  for (Eigen::Index i = 0; i < mb.modes.rows(); ++i) phi[mb.y_index[static_cast<std::size_t>(i)]] = mb.modes(i, 0);
  const double lam = mb.values[0];
  const double w = fl.width;
  GridFunction f = sample(d, [&](const CellPoint& p) -> Complex { return std::exp(-p.r * p.r / (2 * w * w)); });
  for (std::size_t cell = 0; cell < d->size(); ++cell) f.values[cell] *= phi[d->y_index(cell)];

  const bool radial = c.grid.mode != GridMode::FullTensor;
  const double dim = radial ? 3.0 : c.grid.n;
  auto exact = [&](double t) {
    GridFunction u(d);
    const Complex a = w * w - 2.0 * Complex(0, 1) * t;
    const Complex amp = std::pow(w * w / a, 0.5 * dim);
    for (std::size_t cell = 0; cell < d->size(); ++cell) {
      const double rr = d->radius(cell);
      u.values[cell] = amp * std::exp(-rr * rr / (2.0 * a)) * std::polar(1.0, t * lam) * phi[d->y_index(cell)];
    }
    return u;
  };

  std::string csv = "t,sup,outer_fraction\n";
  std::vector<double> ts, sups;
  for (int k = 0; k < fl.samples; ++k) {
    const double t = fl.t_lo * std::exp(std::log(fl.t_hi / fl.t_lo) * k / (fl.samples - 1));
    ModalReference ref = flat_reference_propagator(mb, f, t, fl.box_factor);
    ts.push_back(t);
    sups.push_back(sup_norm(ref.u));
    csv += fmt::format("{},{},{}\n", g17(t), g17(sups.back()), g17(ref.outer_fraction));
  }
  r.text("decay.csv", csv);
  DecayFit fit = fit_decay(ts, sups, fl.t_lo, fl.t_hi);
  json j = {{"threshold", lam},
            {"slope", fit.slope},
            {"intercept", fit.intercept},
            {"fit_residual", fit.residual},
            {"samples", fit.samples},
            {"t_lo", fit.t_lo},
            {"t_hi", fit.t_hi}};
  r.verdict("flat-dispersion", "decay-slope", fit.slope >= c.tol.slope_lo && fit.slope <= c.tol.slope_hi, fit.slope,
            c.tol.slope_hi, fmt::format("admissible range [{:g}, {:g}]", c.tol.slope_lo, c.tol.slope_hi));

  double worst = 0.0;
  json cf = json::array();
  for (double t : fl.check_times) {
    ModalReference ref = flat_reference_propagator(mb, f, t, fl.box_factor);
    GridFunction ex = exact(t);
    GridFunction diff(d, ref.u.values - ex.values);
    const double rel = l2_norm(diff) / l2_norm(ex);
    worst = std::max(worst, rel);
    cf.push_back({{"t", t}, {"relative_error", rel}});
  }
  j["closed_form"] = cf;
  if (!fl.check_times.empty())
    r.at_most("flat-dispersion", "gaussian-closed-form", worst, c.tol.closed_form,
              fmt::format("{} check times", fl.check_times.size()));

  if (fl.compare_evolution) {
    DirichletOperator H = assemble_hamiltonian(d, c.potential);
    EvolveOptions opt;
    opt.trace.eps = {c.evolve.eps.empty() ? 0.1 : c.evolve.eps.front()};
    opt.trace.half_derivative = false;
    opt.trace.gradient = false;
    opt.trace.strichartz = true;
    Trajectory tr = evolve_schrodinger(H, f, fl.compare_t, fl.dt, opt);
    const TraceSeries& ts_cn = tr.traces.front();
    std::vector<double> st2;
    for (double t : ts_cn.t) st2.push_back(std::pow(mixed_norm(flat_reference_propagator(mb, f, t, fl.box_factor).u, 6.0), 2));
    const std::size_t K = ts_cn.t.size() - 1;
    const double st_ref = std::sqrt(trapezoid(ts_cn.t, st2, 0, K));
    const double st_cn = std::sqrt(trapezoid(ts_cn.t, ts_cn.st2, 0, K));
    GridFunction ref = flat_reference_propagator(mb, f, fl.compare_t, fl.box_factor).u;
    GridFunction diff(d, tr.final_state().values - ref.values);
    const double state_err = l2_norm(diff) / l2_norm(ref);
    const double st_err = std::abs(st_cn - st_ref) / st_ref;
    j["evolution_check"] = {{"t", fl.compare_t}, {"dt", fl.dt}, {"state_error", state_err}, {"St_cn", st_cn},
                            {"St_modal", st_ref}, {"St_error", st_err}};
    r.at_most("flat-dispersion", "crank-nicolson-vs-modal", state_err, c.tol.oracle,
              fmt::format("relative L2 error at t = {:g}", fl.compare_t));
    r.at_most("endpoint-strichartz", "flat-modal-oracle", st_err, c.tol.oracle,
              fmt::format("St {:.8g} against modal {:.8g}", st_cn, st_ref));
  }
  r.text("flat.json", j.dump(2) + "\n");

  PlotSeries fitted{fmt::format("fit, slope {:.4f}", fit.slope), {}, {}, false};
  for (double t : ts) {
    fitted.x.push_back(t);
    fitted.y.push_back(std::exp(fit.intercept) * std::pow(t, fit.slope));
  }
  r.plots({PlotSpec{"decay", "sup norm of the modal solution", "t", "sup |u(t)|", true, true,
                    {PlotSeries{"sup |u|", ts, sups, true}, fitted}, {}, {}}});
}

}  // namespace

ResultBundle run_experiment(const ExperimentConfig& config, const fs::path& out) {
  require_valid(ConfigParse{config, check_config(config)});
  ResultBundle b;
  b.config = config;
  b.hash = config_hash(config);
  const fs::path dir = out.empty() ? fs::path(config.out) : out;
  std::unique_ptr<BundleWriter> writer;
  if (!dir.empty()) writer = std::make_unique<BundleWriter>(dir);
  Run r(config, b, writer.get());

  const json echo = {{"hash", b.hash}, {"config", json::parse(config_to_json(config))}};
  r.text("config.json", echo.dump(2) + "\n");

  const auto t0 = std::chrono::steady_clock::now();
  try {
    switch (config.kind) {
      case ExperimentKind::DomainAudit: run_audit(r); break;
      case ExperimentKind::Norms: run_norms(r); break;
      case ExperimentKind::ResolventSweep: run_sweep(r); break;
      case ExperimentKind::Spectrum: run_spectrum(r); break;
      case ExperimentKind::Evolve:
      case ExperimentKind::Duhamel: run_evolve(r); break;
      case ExperimentKind::FlatDispersion: run_flat(r); break;
    }
  } catch (const Error& e) {
    b.error = e.what();
    r.text("error.json", json{{"code", error_name(e.code())}, {"message", e.what()}, {"kind", kind_name(config.kind)}}.dump(2) + "\n");
  }
  b.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.text("verdicts.json", verdicts_to_json(b.verdicts));
  if (writer) {
    // Wall clock is kept out of the JSON and CSV artifacts so that they stay reproducible.
    writer->add("timing.txt", fmt::format("wall_seconds {:.3f}\n", b.wall_seconds));
    writer->commit();
    b.dir = dir;
  }
  return b;
}

}  // namespace wglab
