#include "wglab/config.hpp"

#include <cmath>
#include <functional>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "wglab/io.hpp"

namespace wglab {

using json = nlohmann::json;

namespace {

struct KindName {
  ExperimentKind kind;
  const char* name;
};

constexpr KindName kKinds[] = {
    {ExperimentKind::DomainAudit, "domain-audit"},     {ExperimentKind::Norms, "norms"},
    {ExperimentKind::ResolventSweep, "resolvent-sweep"}, {ExperimentKind::Spectrum, "spectrum"},
    {ExperimentKind::Evolve, "evolve"},                {ExperimentKind::FlatDispersion, "flat-dispersion"},
    {ExperimentKind::Duhamel, "duhamel"},
};

std::string join(const std::string& a, const std::string& b) { return a.empty() ? b : a + "." + b; }

// Walks one JSON object, records type errors and rejects keys nobody read.
class Reader {
 public:
  Reader(const json& j, std::string path, std::vector<ConfigIssue>& issues) : j_(j), path_(std::move(path)), issues_(issues) {
    if (!j_.is_object()) issue(path_, "expected an object");
  }

  bool has(const char* key) const { return j_.is_object() && j_.contains(key); }

  void num(const char* key, double& out) {
    if (!take(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number()) return issue(join(path_, key), "expected a number");
    out = v.get<double>();
    if (!std::isfinite(out)) issue(join(path_, key), "must be finite");
  }

  void integer(const char* key, int& out) {
    if (!take(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number_integer()) return issue(join(path_, key), "expected an integer");
    out = v.get<int>();
  }

  void u64(const char* key, std::uint64_t& out) {
    if (!take(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
      return issue(join(path_, key), "expected a nonnegative integer");
    out = v.get<std::uint64_t>();
  }

  void boolean(const char* key, bool& out) {
    if (!take(key)) return;
    const json& v = j_.at(key);
    if (!v.is_boolean()) return issue(join(path_, key), "expected true or false");
    out = v.get<bool>();
  }

  void str(const char* key, std::string& out) {
    if (!take(key)) return;
    const json& v = j_.at(key);
    if (!v.is_string()) return issue(join(path_, key), "expected a string");
    out = v.get<std::string>();
  }

  void choice(const char* key, std::string& out, std::initializer_list<const char*> allowed) {
    std::string before = out;
    str(key, out);
    for (const char* a : allowed)
      if (out == a) return;
    std::string list;
    for (const char* a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
    issue(join(path_, key), fmt::format("'{}' is not one of {}", out, list));
    out = before;
  }

  void nums(const char* key, std::vector<double>& out) {
    if (!take(key)) return;
    const json& v = j_.at(key);
    if (!v.is_array()) return issue(join(path_, key), "expected an array of numbers");
    out.clear();
    for (const auto& x : v) {
      if (!x.is_number()) return issue(join(path_, key), "expected an array of numbers");
      out.push_back(x.get<double>());
    }
  }

  void obj(const char* key, const std::function<void(Reader&)>& fn) {
    if (!take(key)) return;
    Reader sub(j_.at(key), join(path_, key), issues_);
    if (!j_.at(key).is_object()) return;
    fn(sub);
    sub.finish();
  }

  void finish() {
    if (!j_.is_object()) return;
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) issue(join(path_, it.key()), "unknown key");
  }

  void issue(const std::string& path, const std::string& msg) { issues_.push_back({path, msg}); }
  const std::string& path() const { return path_; }

 private:
  bool take(const char* key) {
    if (!has(key)) return false;
    seen_.insert(key);
    return true;
  }

  const json& j_;
  std::string path_;
  std::vector<ConfigIssue>& issues_;
  std::set<std::string> seen_;
};

void read_section(Reader& r, CrossSection& cs) {
  std::string kind = cs.kind == CrossSection::Kind::Disk ? "disk" : "interval";
  r.choice("kind", kind, {"interval", "disk"});
  if (kind == "disk") {
    double radius = cs.radius;
    r.num("radius", radius);
    cs = CrossSection::disk(radius);
  } else {
    double a = cs.a, b = cs.b;
    r.num("a", a);
    r.num("b", b);
    if (!(b > a)) r.issue(join(r.path(), "b"), "interval needs b > a");
    cs = CrossSection::interval(a, b);
  }
}

void read_scale(Reader& r, ScaleFunction& s) {
  std::string kind = s.kind == ScaleFunction::Kind::Bump ? "bump" : s.kind == ScaleFunction::Kind::Tanh ? "tanh" : "constant";
  r.choice("kind", kind, {"constant", "bump", "tanh"});
  r.num("base", s.base);
  r.num("amplitude", s.amplitude);
  r.num("width", s.width);
  s.kind = kind == "bump" ? ScaleFunction::Kind::Bump : kind == "tanh" ? ScaleFunction::Kind::Tanh : ScaleFunction::Kind::Constant;
  if (!(s.width > 0.0)) r.issue(join(r.path(), "width"), "width must be positive");
}

void read_profile(Reader& r, ProfileSpec& p) {
  std::string variant = "flat";
  r.choice("variant", variant, {"flat", "radial", "witsch"});
  CrossSection cs = CrossSection::interval(0.0, kPi);
  r.obj("section", [&](Reader& s) { read_section(s, cs); });
  if (variant == "flat") {
    p = ProfileSpec::flat(cs);
  } else if (variant == "radial") {
    ScaleFunction g = ScaleFunction::constant();
    r.obj("scale", [&](Reader& s) { read_scale(s, g); });
    p = ProfileSpec::radial(g, cs);
  } else {
    double a = 0.5, b = 2.0;
    r.num("a", a);
    r.num("b", b);
    if (!(a > 0.0) || !(b > 0.0)) {
      r.issue(r.path(), "Witsch bump needs a > 0 and b > 0");
      p = ProfileSpec::flat(cs);
    } else {
      p = ProfileSpec::witsch(a, b, cs);
    }
  }
}

void read_grid(Reader& r, GridSpec& g) {
  r.integer("n", g.n);
  r.integer("m", g.m);
  std::string mode = grid_mode_name(g.mode);
  r.choice("mode", mode, {"RadialX", "RadialXRadialY", "FullTensor"});
  g.mode = parse_grid_mode(mode);
  r.num("extent_x", g.extent_x);
  r.num("y_lo", g.y_lo);
  r.num("y_hi", g.y_hi);
  r.num("h_x", g.h_x);
  r.num("h_y", g.h_y);
}

void read_potential(Reader& r, PotentialField& V) {
  std::string kind = "zero";
  r.choice("kind", kind, {"zero", "constant", "inverse_r", "linear_r", "gaussian_inverse_r"});
  double c = 0.0, width = 1.0;
  r.num("c", c);
  r.num("width", width);
  if (kind == "zero") V = PotentialField::zero();
  else if (kind == "constant") V = PotentialField::constant(c);
  else if (kind == "inverse_r") V = PotentialField::inverse_r(c);
  else if (kind == "linear_r") V = PotentialField::linear_r(c);
  else V = PotentialField::gaussian_inverse_r(c, width);
}

json section_json(const CrossSection& cs) {
  if (cs.kind == CrossSection::Kind::Disk) return {{"kind", "disk"}, {"radius", cs.radius}};
  return {{"kind", "interval"}, {"a", cs.a}, {"b", cs.b}};
}

json profile_json(const ProfileSpec& p) {
  json j;
  j["section"] = section_json(p.section);
  switch (p.variant) {
    case ProfileSpec::Variant::FlatProduct: j["variant"] = "flat"; break;
    case ProfileSpec::Variant::WitschBump:
      j["variant"] = "witsch";
      j["a"] = p.scale.amplitude;
      j["b"] = p.scale.width;
      break;
    case ProfileSpec::Variant::RadialProfile: {
      j["variant"] = "radial";
      const char* k = p.scale.kind == ScaleFunction::Kind::Bump   ? "bump"
                      : p.scale.kind == ScaleFunction::Kind::Tanh ? "tanh"
                                                                  : "constant";
      j["scale"] = {{"kind", k}, {"base", p.scale.base}, {"amplitude", p.scale.amplitude}, {"width", p.scale.width}};
      break;
    }
  }
  return j;
}

json potential_json(const PotentialField& V) {
  const char* k = "zero";
  switch (V.kind) {
    case PotentialField::Kind::Zero: k = "zero"; break;
    case PotentialField::Kind::Constant: k = "constant"; break;
    case PotentialField::Kind::InverseR: k = "inverse_r"; break;
    case PotentialField::Kind::LinearR: k = "linear_r"; break;
    case PotentialField::Kind::GaussianInverseR: k = "gaussian_inverse_r"; break;
    case PotentialField::Kind::Samples: k = "samples"; break;
  }
  return {{"kind", k}, {"c", V.c}, {"width", V.width}};
}

}  // namespace

const char* kind_name(ExperimentKind k) {
  for (const auto& e : kKinds)
    if (e.kind == k) return e.name;
  return "?";
}

ConfigParse parse_config(const std::string& text) {
  ConfigParse p;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    p.issues.push_back({"", std::string("not valid JSON: ") + e.what()});
    return p;
  }
  ExperimentConfig& c = p.config;
  Reader r(j, "", p.issues);
  if (!j.is_object()) return p;
  if (!r.has("schema")) p.issues.push_back({"schema", "missing"});
  r.str("schema", c.schema);
  r.str("name", c.name);
  if (!r.has("kind")) {
    p.issues.push_back({"kind", "missing"});
  } else {
    std::string kind;
    r.str("kind", kind);
    bool found = false;
    for (const auto& e : kKinds)
      if (kind == e.name) {
        c.kind = e.kind;
        found = true;
      }
    if (!found) p.issues.push_back({"kind", fmt::format("unknown experiment kind '{}'", kind)});
  }
  if (!r.has("profile")) p.issues.push_back({"profile", "missing"});
  if (!r.has("grid")) p.issues.push_back({"grid", "missing"});
  r.obj("profile", [&](Reader& s) { read_profile(s, c.profile); });
  r.obj("grid", [&](Reader& s) { read_grid(s, c.grid); });
  r.obj("potential", [&](Reader& s) { read_potential(s, c.potential); });
  r.obj("sweep", [&](Reader& s) {
    s.obj("z_grid", [&](Reader& z) {
      z.nums("lambda", c.sweep.lambda);
      z.nums("eps", c.sweep.eps);
      std::string scale = c.sweep.scale_by_threshold ? "threshold" : "absolute";
      z.choice("scale", scale, {"threshold", "absolute"});
      c.sweep.scale_by_threshold = scale == "threshold";
    });
    s.integer("sources", c.sweep.sources);
    s.num("support_radius", c.sweep.support_radius);
    s.num("weight_eps", c.sweep.weight_eps);
    s.integer("ell_x", c.sweep.ell_x);
    s.integer("k_y", c.sweep.k_y);
    s.boolean("add_embedded", c.sweep.add_embedded);
    s.choice("expect", c.sweep.expect, {"uniform", "blowup"});
  });
  r.obj("norms", [&](Reader& s) {
    s.integer("fields", c.norms.fields);
    s.nums("R", c.norms.R);
    s.nums("s", c.norms.s);
  });
  r.obj("spectrum", [&](Reader& s) {
    s.num("a", c.spectrum.a);
    s.num("b", c.spectrum.b);
    std::string scale = c.spectrum.scale_by_threshold ? "threshold" : "absolute";
    s.choice("scale", scale, {"threshold", "absolute"});
    c.spectrum.scale_by_threshold = scale == "threshold";
    s.integer("ell_x", c.spectrum.ell_x);
    s.integer("k_y", c.spectrum.k_y);
    s.integer("shifts", c.spectrum.shifts);
    s.integer("krylov_dim", c.spectrum.krylov_dim);
    s.num("tol", c.spectrum.tol);
    s.boolean("dense_check", c.spectrum.dense_check);
    s.choice("expect", c.spectrum.expect, {"any", "absence", "bound-state", "embedded", "none-below-threshold"});
  });
  r.obj("evolve", [&](Reader& s) {
    s.choice("flow", c.evolve.flow, {"schrodinger", "wave"});
    s.num("T", c.evolve.T);
    s.num("dt", c.evolve.dt);
    s.num("mu", c.evolve.mu);
    s.nums("eps", c.evolve.eps);
    s.obj("datum", [&](Reader& d) {
      d.choice("kind", c.evolve.datum.kind, {"gaussian", "eigenstate"});
      d.num("width", c.evolve.datum.width);
      d.num("center", c.evolve.datum.center);
      d.integer("y_mode", c.evolve.datum.y_mode);
    });
    s.boolean("strichartz", c.evolve.strichartz);
    s.boolean("half_derivative", c.evolve.half_derivative);
    s.choice("wave_route", c.evolve.wave_route, {"auto", "spectral", "leapfrog"});
    s.integer("snapshot_every", c.evolve.snapshot_every);
    s.num("source_T", c.evolve.source_T);
    s.choice("expect", c.evolve.expect, {"dispersive", "trapped", "none"});
  });
  r.obj("flat", [&](Reader& s) {
    s.num("t_lo", c.flat.t_lo);
    s.num("t_hi", c.flat.t_hi);
    s.integer("samples", c.flat.samples);
    s.nums("check_times", c.flat.check_times);
    s.num("box_factor", c.flat.box_factor);
    s.num("width", c.flat.width);
    s.integer("modes", c.flat.modes);
    s.boolean("compare_evolution", c.flat.compare_evolution);
    s.num("compare_t", c.flat.compare_t);
    s.num("dt", c.flat.dt);
  });
  r.obj("tolerances", [&](Reader& s) {
    Tolerances& t = c.tol;
    s.num("max_ratio", t.max_ratio);
    s.num("trend", t.trend);
    s.num("contrast_trend", t.contrast_trend);
    s.num("identity", t.identity);
    s.num("margin", t.margin);
    s.num("plateau", t.plateau);
    s.num("strichartz_plateau", t.strichartz_plateau);
    s.num("mass_drift", t.mass_drift);
    s.num("energy_drift", t.energy_drift);
    s.num("slope_lo", t.slope_lo);
    s.num("slope_hi", t.slope_hi);
    s.num("closed_form", t.closed_form);
    s.num("oracle", t.oracle);
    s.num("doubling", t.doubling);
    s.num("eig_doubling", t.eig_doubling);
    s.num("residual", t.residual);
    s.num("stationary", t.stationary);
  });
  r.u64("seed", c.seed);
  r.integer("jobs", c.jobs);
  r.boolean("extent_doubling", c.extent_doubling);
  r.str("out", c.out);
  r.finish();
  if (p.issues.empty()) p.issues = check_config(c);
  return p;
}

ConfigParse load_config(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    ConfigParse p;
    p.issues.push_back({"", e.what()});
    return p;
  }
  return parse_config(text);
}

std::vector<ConfigIssue> check_config(const ExperimentConfig& c) {
  std::vector<ConfigIssue> out;
  auto bad = [&](const std::string& path, const std::string& msg) { out.push_back({path, msg}); };
  const GridSpec& g = c.grid;
  if (c.schema != kConfigSchema) bad("schema", fmt::format("expected '{}'", kConfigSchema));
  if (g.n < 3) bad("grid.n", "n must be ≥ 3");
  if (g.m < 1) bad("grid.m", "m must be ≥ 1");
  if (!(g.h_x > 0.0)) bad("grid.h_x", "must be positive");
  if (!(g.h_y > 0.0)) bad("grid.h_y", "must be positive");
  if (!(g.extent_x > 0.0)) bad("grid.extent_x", "must be positive");
  if (!(g.y_hi > g.y_lo)) bad("grid.y_hi", "must exceed y_lo");
  const bool disk = c.profile.section.kind == CrossSection::Kind::Disk;
  if (g.mode == GridMode::RadialXRadialY && (!disk || g.m != 2))
    bad("grid.mode", "RadialXRadialY needs a disk cross-section and m = 2");
  if (g.mode == GridMode::RadialX && !disk && g.m != 1) bad("grid.m", "an interval cross-section needs m = 1");
  if (disk && g.mode == GridMode::RadialX && g.m != 2) bad("grid.m", "a disk cross-section needs m = 2");
  if (c.jobs < 1) bad("jobs", "must be at least 1");

  switch (c.kind) {
    case ExperimentKind::DomainAudit: break;
    case ExperimentKind::Norms:
      if (c.norms.fields < 3) bad("norms.fields", "needs at least 3 fields");
      for (double R : c.norms.R)
        if (!(R > 0.0)) bad("norms.R", "radii must be positive");
      for (double s : c.norms.s)
        if (!(s > 0.0)) bad("norms.s", "exponents must be positive");
      if (g.mode != GridMode::RadialX) bad("grid.mode", "the norm suite runs on RadialX grids");
      break;
    case ExperimentKind::ResolventSweep:
      if (c.sweep.lambda.empty() || c.sweep.eps.empty()) bad("sweep.z_grid", "z grid is empty");
      for (double e : c.sweep.eps)
        if (!(e > 0.0)) bad("sweep.z_grid.eps", "ε must be > 0");
      if (c.sweep.sources < 1) bad("sweep.sources", "needs at least one source");
      if (!(c.sweep.support_radius > 0.0)) bad("sweep.support_radius", "must be positive");
      if (!(c.sweep.weight_eps > 0.0)) bad("sweep.weight_eps", "ε must be > 0");
      break;
    case ExperimentKind::Spectrum:
      if (!(c.spectrum.b > c.spectrum.a)) bad("spectrum.b", "window needs b > a");
      if (c.spectrum.shifts < 1) bad("spectrum.shifts", "must be at least 1");
      if (c.spectrum.krylov_dim < 4) bad("spectrum.krylov_dim", "must be at least 4");
      if (!(c.spectrum.tol > 0.0)) bad("spectrum.tol", "must be positive");
      break;
    case ExperimentKind::Evolve:
    case ExperimentKind::Duhamel: {
      const EvolveSettings& e = c.evolve;
      if (!(e.dt > 0.0)) bad("evolve.dt", "dt must be > 0");
      if (!(e.T > 0.0)) bad("evolve.T", "T must be > 0");
      if (e.dt > 0.0 && e.T > 0.0) {
        double k = e.T / e.dt;
        if (std::abs(k - std::round(k)) > 1e-9 * k) bad("evolve.T", "T must be a multiple of dt");
        else if (static_cast<long>(std::llround(k)) % 2 != 0) bad("evolve.T", "T / dt must be even (traces are read at T/2)");
      }
      if (e.eps.empty()) bad("evolve.eps", "needs at least one ε");
      for (double x : e.eps)
        if (!(x > 0.0)) bad("evolve.eps", "ε must be > 0");
      if (!(e.mu >= 0.0)) bad("evolve.mu", "mu must be ≥ 0");
      if (!(e.datum.width > 0.0)) bad("evolve.datum.width", "must be positive");
      if (e.datum.y_mode < 1) bad("evolve.datum.y_mode", "modes are numbered from 1");
      if (e.strichartz && !c.profile.flat_radius()) bad("evolve.strichartz", "Strichartz measurement requires a flat tail");
      if ((e.half_derivative || e.strichartz) && g.mode != GridMode::FullTensor && g.n != 3)
        bad("evolve.half_derivative", "|D_x|^{1/2} on radial grids needs n = 3");
      if (c.kind == ExperimentKind::Duhamel && e.flow != "schrodinger") bad("evolve.flow", "Duhamel runs use the Schrödinger flow");
      if (c.kind == ExperimentKind::Duhamel && !(e.source_T > 0.0)) bad("evolve.source_T", "must be positive");
      if (c.kind == ExperimentKind::Duhamel && e.datum.kind != "gaussian") bad("evolve.datum.kind", "Duhamel sources are Gaussian");
      break;
    }
    case ExperimentKind::FlatDispersion:
      if (c.profile.variant != ProfileSpec::Variant::FlatProduct) bad("profile.variant", "flat dispersion needs a flat product");
      if (!(c.flat.t_lo > 0.0) || !(c.flat.t_hi > c.flat.t_lo)) bad("flat.t_hi", "needs 0 < t_lo < t_hi");
      if (c.flat.samples < 2) bad("flat.samples", "needs at least 2 samples");
      if (!(c.flat.box_factor >= 1.0)) bad("flat.box_factor", "must be at least 1");
      if (c.flat.modes < 1) bad("flat.modes", "needs at least one mode");
      if (!(c.flat.width > 0.0)) bad("flat.width", "must be positive");
      if (!(c.flat.dt > 0.0)) bad("flat.dt", "dt must be > 0");
      if (g.mode != GridMode::FullTensor && g.n != 3) bad("grid.n", "radial free propagation needs n = 3");
      break;
  }
  return out;
}

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  j["schema"] = c.schema;
  j["name"] = c.name;
  j["kind"] = kind_name(c.kind);
  j["profile"] = profile_json(c.profile);
  j["grid"] = {{"n", c.grid.n},         {"m", c.grid.m},       {"mode", grid_mode_name(c.grid.mode)},
               {"extent_x", c.grid.extent_x}, {"y_lo", c.grid.y_lo}, {"y_hi", c.grid.y_hi},
               {"h_x", c.grid.h_x},     {"h_y", c.grid.h_y}};
  j["potential"] = potential_json(c.potential);
  j["sweep"] = {{"z_grid",
                 {{"lambda", c.sweep.lambda},
                  {"eps", c.sweep.eps},
                  {"scale", c.sweep.scale_by_threshold ? "threshold" : "absolute"}}},
                {"sources", c.sweep.sources},
                {"support_radius", c.sweep.support_radius},
                {"weight_eps", c.sweep.weight_eps},
                {"ell_x", c.sweep.ell_x},
                {"k_y", c.sweep.k_y},
                {"add_embedded", c.sweep.add_embedded},
                {"expect", c.sweep.expect}};
  j["norms"] = {{"fields", c.norms.fields}, {"R", c.norms.R}, {"s", c.norms.s}};
  const SpectrumSettings& sp = c.spectrum;
  j["spectrum"] = {{"a", sp.a},
                   {"b", sp.b},
                   {"scale", sp.scale_by_threshold ? "threshold" : "absolute"},
                   {"ell_x", sp.ell_x},
                   {"k_y", sp.k_y},
                   {"shifts", sp.shifts},
                   {"krylov_dim", sp.krylov_dim},
                   {"tol", sp.tol},
                   {"dense_check", sp.dense_check},
                   {"expect", sp.expect}};
  const EvolveSettings& e = c.evolve;
  j["evolve"] = {{"flow", e.flow},
                 {"T", e.T},
                 {"dt", e.dt},
                 {"mu", e.mu},
                 {"eps", e.eps},
                 {"datum",
                  {{"kind", e.datum.kind}, {"width", e.datum.width}, {"center", e.datum.center}, {"y_mode", e.datum.y_mode}}},
                 {"strichartz", e.strichartz},
                 {"half_derivative", e.half_derivative},
                 {"wave_route", e.wave_route},
                 {"snapshot_every", e.snapshot_every},
                 {"source_T", e.source_T},
                 {"expect", e.expect}};
  const FlatSettings& f = c.flat;
  j["flat"] = {{"t_lo", f.t_lo},     {"t_hi", f.t_hi},       {"samples", f.samples},
               {"check_times", f.check_times}, {"box_factor", f.box_factor}, {"width", f.width},
               {"modes", f.modes},   {"compare_evolution", f.compare_evolution},
               {"compare_t", f.compare_t}, {"dt", f.dt}};
  const Tolerances& t = c.tol;
  j["tolerances"] = {{"max_ratio", t.max_ratio},
                     {"trend", t.trend},
                     {"contrast_trend", t.contrast_trend},
                     {"identity", t.identity},
                     {"margin", t.margin},
                     {"plateau", t.plateau},
                     {"strichartz_plateau", t.strichartz_plateau},
                     {"mass_drift", t.mass_drift},
                     {"energy_drift", t.energy_drift},
                     {"slope_lo", t.slope_lo},
                     {"slope_hi", t.slope_hi},
                     {"closed_form", t.closed_form},
                     {"oracle", t.oracle},
                     {"doubling", t.doubling},
                     {"eig_doubling", t.eig_doubling},
                     {"residual", t.residual},
                     {"stationary", t.stationary}};
  j["seed"] = c.seed;
  j["jobs"] = c.jobs;
  j["extent_doubling"] = c.extent_doubling;
  return j.dump(2) + "\n";
}

std::string config_hash(const ExperimentConfig& c) { return fnv1a_hex(config_to_json(c)); }

void require_valid(const ConfigParse& p) {
  if (p.ok()) return;
  const ConfigIssue& i = p.issues.front();
  fail(ErrorCode::ConfigInvalid, i.path.empty() ? i.message : fmt::format("{}: {}", i.path, i.message));
}

}  // namespace wglab
