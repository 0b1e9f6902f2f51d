// toalab: batch front end. One subcommand per experiment; a CSV with the
// bulk data and a JSON sidecar with the resolved config and summary numbers.

#include "config.hpp"

#include "toalab/biphoton.hpp"
#include "toalab/compare.hpp"
#include "toalab/hom.hpp"
#include "toalab/resonance.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace toalab;
using namespace toalab::cli;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12e", v);
  return buf;
}

// JSON cannot carry NaN; those become null.
json jnum(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

class Csv {
 public:
  Csv(const fs::path& path, const std::vector<std::string>& header) : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    write(header);
  }
  void row(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (const double v : values) cells.push_back(num(v));
    write(cells);
  }
  void row(const std::string& first, const std::vector<double>& values) {
    std::vector<std::string> cells{first};
    for (const double v : values) cells.push_back(num(v));
    write(cells);
  }

 private:
  void write(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }
  std::ofstream out_;
};

struct Run {
  RunConfig cfg;
  Units units;
  fs::path out;
  std::string name;
  json results = json::object();
  std::vector<json> files;

  // Particle potential in natural units.
  [[nodiscard]] PotentialSpec potential() const {
    auto s = cfg.potential();
    for (auto& seg : s.segments) seg.value /= units.energy;
    return s;
  }
  [[nodiscard]] double t_in(double t) const { return t / units.time; }
  [[nodiscard]] double t_out(double t) const { return t * units.time; }
  [[nodiscard]] double e_out(double e) const { return e * units.energy; }

  Csv csv(const std::string& file, const std::vector<std::string>& columns) {
    files.push_back({{"file", file}, {"columns", columns}});
    return Csv(out / file, columns);
  }

  void sidecar() const {
    json j;
    j["tool"] = "toalab";
    j["subcommand"] = name;
    j["units"] = units.name;
    j["outputs"] = files;
    j["results"] = results;
    j["config"] = to_json(cfg);
    std::ofstream f(out / (name + ".json"), std::ios::binary);
    f << j.dump(2) << '\n';
  }
};

void run_toa(Run& r) {
  const auto& c = r.cfg.toa;
  const auto spec = r.potential();
  const WavePacket& w = r.cfg.packet;
  const auto points = static_cast<std::size_t>(c.points);
  const TimeGrid grid = c.t_min ? TimeGrid{r.t_in(*c.t_min), r.t_in(*c.t_max), points}
                                : auto_time_grid(w, spec, c.detector, points);
  ArrivalOptions o;
  o.auto_widen = c.auto_widen;
  const auto d = toa_density(w, spec, c.detector, grid, o);

  auto csv = r.csv("toa.csv", {"t", "density"});
  for (std::size_t i = 0; i < d.t.size(); ++i) csv.row({r.t_out(d.t[i]), d.density[i] / r.units.time});

  double classical = kNaN;
  try {
    classical = r.t_out(classical_arrival_time(spec, w.q0, w.p0, c.detector, w.mass));
  } catch (const Error&) {
  } catch (const std::invalid_argument&) {
  }
  r.results = {{"detector", c.detector},
               {"samples", d.t.size()},
               {"t_min", r.t_out(d.t.front())},
               {"t_max", r.t_out(d.t.back())},
               {"detection_norm", d.detection_norm},
               {"grid_norm", d.grid_norm},
               {"mean_t", r.t_out(d.mean_t)},
               {"rms_t", r.t_out(d.rms_t)},
               {"classical_t", jnum(classical)},
               {"right_mover_warning", d.right_mover_warning},
               {"quadrature_nodes", d.quadrature_nodes}};
}

void run_hartman(Run& r) {
  const auto& c = r.cfg.hartman;
  const WavePacket& w = r.cfg.packet;
  const double height = c.height / r.units.energy;
  const auto scan = hartman_scan(w, height, c.widths, c.barrier_start, c.detector_offset);
  const double e = w.p0 * w.p0 / (2.0 * w.mass);
  const double kappa = std::sqrt(2.0 * w.mass * (height - e));
  auto csv = r.csv("hartman.csv", {"width", "kappa_width", "mean_t", "rms_t", "detection_norm", "free_traversal_t"});
  json steps = json::array();
  for (std::size_t i = 0; i < scan.size(); ++i) {
    const auto& p = scan[i];
    const double free_t = w.mass * p.width / w.p0;
    csv.row({p.width, kappa * p.width, r.t_out(p.mean_t), r.t_out(p.rms_t), p.detection_norm, r.t_out(free_t)});
    if (i > 0) {
      const double added = w.mass * (p.width - scan[i - 1].width) / w.p0;
      const double change = p.mean_t - scan[i - 1].mean_t;
      steps.push_back({{"from_width", scan[i - 1].width},
                       {"to_width", p.width},
                       {"mean_change", r.t_out(change)},
                       {"relative_to_free_traversal", added > 0.0 ? jnum(change / added) : json(nullptr)}});
    }
  }
  r.results = {{"kappa", kappa}, {"steps", steps}};
}

void run_resonances(Run& r) {
  const auto& c = r.cfg.resonances;
  const auto spec = r.potential();
  PoleSearchOptions o;
  o.edge_points = static_cast<std::size_t>(c.edge_points);
  const auto poles = find_poles(spec, c.box, static_cast<std::size_t>(c.max_poles), r.cfg.packet.mass, o);
  auto csv = r.csv("resonances.csv", {"kind", "re_k", "im_k", "e_r", "gamma", "lifetime", "residual", "bw_e_r",
                                      "bw_gamma", "bw_r_squared"});
  int overlapping = 0, poor = 0;
  for (const auto& p : poles) {
    double be = kNaN, bg = kNaN, br = kNaN;
    if (c.breit_wigner && p.kind == PoleKind::resonance) {
      try {
        const auto f = breit_wigner_fit(spec, p, r.cfg.packet.mass);
        be = r.e_out(f.e_r);
        bg = r.e_out(f.gamma);
        br = f.r_squared;
        poor += f.poor_fit;
      } catch (const OverlappingResonances&) {
        ++overlapping;
      }
    }
    const char* kind = p.kind == PoleKind::resonance ? "resonance" : p.kind == PoleKind::bound ? "bound" : "other";
    csv.row(kind, {p.k_pole.real(), p.k_pole.imag(), r.e_out(p.e_r), r.e_out(p.gamma), r.t_out(p.lifetime),
                   p.residual, be, bg, br});
  }
  r.results = {{"poles", poles.size()},
               {"count_in_box", count_poles(spec, c.box, r.cfg.packet.mass, o)},
               {"breit_wigner_overlapping", overlapping},
               {"breit_wigner_poor", poor}};
}

void run_tdse(Run& r) {
  const auto& c = r.cfg.tdse;
  EvolveOptions o;
  o.dt = r.t_in(c.dt);
  o.n_steps = static_cast<std::size_t>(std::llround(c.t_max / c.dt));
  o.absorber = c.absorber;
  o.detectors = c.detectors;
  o.regions = c.regions;
  const auto tr = evolve(r.potential(), r.cfg.packet, c.domain, o);

  std::vector<std::string> cols{"t", "total_norm"};
  for (std::size_t i = 0; i < c.detectors.size(); ++i) cols.push_back("flux_" + std::to_string(i));
  for (std::size_t i = 0; i < c.regions.size(); ++i) cols.push_back("region_" + std::to_string(i));
  auto csv = r.csv("tdse.csv", cols);
  const auto stride = static_cast<std::size_t>(c.output_stride);
  for (std::size_t k = 0; k < tr.t.size(); k += stride) {
    std::vector<double> row{r.t_out(tr.t[k]), tr.total_norm[k]};
    for (const auto& f : tr.flux) row.push_back(f[k] / r.units.time);
    for (const auto& g : tr.region_norm) row.push_back(g[k]);
    csv.row(row);
  }
  json through = json::array();
  for (const auto& f : tr.flux) through.push_back(trapezoid(tr.t, f));
  r.results = {{"steps", o.n_steps},
               {"initial_norm", tr.total_norm.front()},
               {"final_norm", tr.total_norm.back()},
               {"flux_integrals", through}};
}

void write_overlay(Run& r, const FluxOverlay& ov, std::size_t stride) {
  auto csv = r.csv("compare.csv", {"t", "toa_density", "tdse_flux"});
  for (std::size_t k = 0; k < ov.t.size(); k += stride)
    csv.row({r.t_out(ov.t[k]), ov.toa[k] / r.units.time, ov.flux[k] / r.units.time});
}

void run_compare(Run& r) {
  const auto& c = r.cfg.compare;
  CompareSetup run{c.domain, r.t_in(c.dt), r.t_in(c.t_max), c.absorber};
  const auto spec = r.potential();
  const auto stride = static_cast<std::size_t>(c.output_stride);
  if (c.mode == "overlay") {
    const auto ov = overlay_toa_and_flux(spec, r.cfg.packet, c.detector, run);
    write_overlay(r, ov, stride);
    r.results = {{"mode", "overlay"},
                 {"toa_norm", ov.toa_norm},
                 {"flux_norm", ov.flux_norm},
                 {"normalized_l1", ov.l1}};
    return;
  }
  ResonanceSetup s;
  s.run = run;
  s.box = c.box;
  if (c.cavity) s.cavity = *c.cavity;
  s.trapped_fit_from = r.t_in(c.trapped_fit_from);
  s.trapped_fit_to = r.t_in(c.trapped_fit_to);
  s.flux_fit_from = r.t_in(c.flux_fit_from);
  s.flux_fit_to = r.t_in(c.flux_fit_to);
  s.tail_from = r.t_in(c.tail_from);
  s.toa_extension = c.toa_extension;
  const auto rc = compare_resonance(spec, r.cfg.packet, c.detector, s);
  write_overlay(r, rc.overlay, stride);
  const double rate = 1.0 / r.units.time;
  r.results = {{"mode", "resonance"},
               {"pole", {{"re_k", rc.pole.k_pole.real()},
                         {"im_k", rc.pole.k_pole.imag()},
                         {"e_r", r.e_out(rc.pole.e_r)},
                         {"gamma", r.e_out(rc.pole.gamma)},
                         {"decay_rate", rc.pole.gamma * rate}}},
               {"cavity", {{"a", rc.cavity.a}, {"b", rc.cavity.b}}},
               {"trapped_decay_rate", rc.trapped.rate * rate},
               {"trapped_rate_error", rc.trapped_rate_error},
               {"trapped_fit_r_squared", rc.trapped.r_squared},
               {"flux_decay_rate", rc.flux.rate * rate},
               {"flux_rate_error", rc.flux_rate_error},
               {"flux_fit_r_squared", rc.flux.r_squared},
               {"tdse_tail_mass", rc.tdse_tail_mass},
               {"toa_tail_mass", rc.toa_tail_mass},
               {"tail_mass_ratio", jnum(rc.tail_ratio)},
               {"toa_misses_tail", rc.tail_ratio > 10.0},
               {"toa_norm", rc.overlay.toa_norm},
               {"flux_norm", rc.overlay.flux_norm},
               {"normalized_l1", rc.overlay.l1}};
}

json tail_json(const ModeProfile& p, TailSide side, double decades) {
  try {
    const auto f = classify_tail(p, side, decades);
    return {{"class", to_string(f.kind)}, {"beta", f.beta}, {"decades", f.decades}, {"points", f.points}};
  } catch (const InsufficientRange&) {
    return {{"class", "insufficient_range"}};
  }
}

void run_biphoton(Run& r) {
  const auto& c = r.cfg.biphoton;
  KernelGrid g;
  g.n_atom = static_cast<std::size_t>(c.n_atom);
  g.n_photon = static_cast<std::size_t>(c.n_photon);
  g.atom_half_span = c.atom_half_span;
  g.photon_half_span = c.photon_half_span;
  g.tail_target = c.tail_target;
  const auto res = schmidt_decompose(build_kernel(c.gamma, c.delta_omega, g));
  const auto modes = static_cast<std::size_t>(c.modes);

  auto spec = r.csv("biphoton_spectrum.csv", {"mode", "lambda"});
  double sum = 0.0;
  for (std::size_t n = 0; n < res.size(); ++n) {
    sum += res.lambdas[n];
    if (n < modes) spec.row({static_cast<double>(n + 1), res.lambdas[n]});
  }

  auto prof = r.csv("biphoton_modes.csv", {"species", "mode", "x_scaled", "density"});
  json per_mode = json::array();
  const auto points = static_cast<std::size_t>(c.profile_points);
  for (std::size_t n = 0; n < modes; ++n) {
    const auto ph = mode_position_profile(res, n, c.gamma_t, Species::photon, points);
    const auto at = mode_position_profile(res, n, c.gamma_t, Species::atom, points);
    for (std::size_t i = 0; i < points; ++i)
      prof.row("photon", {static_cast<double>(n + 1), ph.x_scaled[i], ph.density[i]});
    for (std::size_t i = 0; i < points; ++i)
      prof.row("atom", {static_cast<double>(n + 1), at.x_scaled[i], at.density[i]});
    const std::size_t ip = std::max_element(ph.density.begin(), ph.density.end()) - ph.density.begin();
    const std::size_t ia = std::max_element(at.density.begin(), at.density.end()) - at.density.begin();
    // Density a hair past the light front against the peak.
    const double eps = 1e-6;
    const std::vector<double> beyond{c.gamma_t + eps};
    const double edge = mode_position_profile(res, n, c.gamma_t, Species::photon, beyond).density[0];
    per_mode.push_back({{"mode", n + 1},
                        {"lambda", res.lambdas[n]},
                        {"photon_peak", ph.x_scaled[ip]},
                        {"photon_edge_ratio", edge / ph.density[ip]},
                        {"photon_trailing_tail", tail_json(ph, TailSide::left, c.tail_decades)},
                        {"atom_peak", at.x_scaled[ia]},
                        {"atom_left_tail", tail_json(at, TailSide::left, c.tail_decades)},
                        {"atom_right_tail", tail_json(at, TailSide::right, c.tail_decades)}});
  }
  r.results = {{"lambda_sum", sum},
               {"schmidt_number", res.schmidt_number()},
               {"truncated_probability", res.kernel.truncated_probability},
               {"time_too_small", c.gamma_t < 3.0},
               {"modes", per_mode}};
}

json dip_json(const HOMTrace& t) {
  if (!t.has_stats) return {{"found", false}, {"edge_deviation", t.edge_deviation}};
  return {{"found", true},
          {"delay_min_fs", t.stats.delay_min},
          {"delta_min_um", t.stats.delta_min},
          {"p_min", t.stats.p_min},
          {"depth", t.stats.depth},
          {"half_depth_width_fs", jnum(t.stats.half_depth_width)},
          {"shallow", t.stats.shallow},
          {"edge_deviation", t.edge_deviation},
          {"spectral_points", t.spectral_points}};
}

void run_hom(Run& r) {
  const auto& c = r.cfg.hom;
  const double w0 = angular_frequency_from_wavelength(c.wavelength_um);
  const bool calibrated = !c.sigma;
  const double sigma = c.sigma ? *c.sigma : calibrate_gaussian_bandwidth(c.width_fs);
  const auto spectrum = gaussian_spectrum(w0, sigma, static_cast<std::size_t>(c.spectral_points));
  const auto delays = linspace(c.delay_min, c.delay_max, static_cast<std::size_t>(c.delay_points));
  const auto ref = coincidence_scan(spectrum, {}, delays);

  std::optional<HOMTrace> with;
  json stack = nullptr;
  if (c.stack.enabled) {
    const auto s = quarter_wave_stack(c.stack.n_high, c.stack.n_low, static_cast<int>(c.stack.periods), w0,
                                      c.stack.exterior);
    with = coincidence_scan(spectrum, stack_arm(s), delays);
    const auto resp = stack_transfer(s, w0);
    stack = {{"length_fs", resp.length},
             {"length_um", resp.length * kLightSpeedUmPerFs},
             {"group_delay_fs", resp.group_delay},
             {"expected_shift_fs", resp.group_delay - resp.length},
             {"group_velocity_over_c", resp.group_velocity},
             {"transmittance", std::norm(resp.transmission)},
             {"dip", dip_json(*with)}};
  }
  auto csv = r.csv("hom.csv", {"delay_fs", "delta_um", "pc_reference", "pc_stack"});
  for (std::size_t i = 0; i < delays.size(); ++i)
    csv.row({delays[i], ref.delta[i], ref.pc[i], with ? with->pc[i] : kNaN});
  r.results = {{"omega0", w0},
               {"sigma", sigma},
               {"sigma_calibrated", calibrated},
               {"reference", dip_json(ref)},
               {"stack", stack}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"toalab: time-of-arrival laboratory"};
  app.require_subcommand(1);
  std::string config_path, out_dir = ".", units_flag;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "YAML run configuration (or a JSON sidecar)")->required();
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "global seed recorded with the run");
  app.add_option("--units", units_flag, "natural or lab")->check(CLI::IsMember({"natural", "lab"}));

  const std::vector<std::pair<std::string, void (*)(Run&)>> commands{
      {"toa", run_toa},           {"hartman", run_hartman}, {"resonances", run_resonances},
      {"tdse", run_tdse},         {"compare", run_compare}, {"biphoton", run_biphoton},
      {"hom", run_hom}};
  const std::vector<std::string> help{"arrival-time density at a detector",
                                      "mean arrival behind barriers of growing width",
                                      "pole table of the transmission amplitude",
                                      "direct time evolution with flux and trapped-norm probes",
                                      "arrival density against simulated detector flux",
                                      "Schmidt spectrum and mode profiles of the atom-photon pair",
                                      "coincidence dip with and without a band-gap stack"};
  for (std::size_t i = 0; i < commands.size(); ++i) app.add_subcommand(commands[i].first, help[i])->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  Run run;
  try {
    run.cfg = load_config(config_path);
    if (seed) run.cfg.seed = *seed;
    if (!units_flag.empty()) run.cfg.units = units_flag;
    run.units = Units::from_name(run.cfg.units);
    run.out = out_dir;
    fs::create_directories(run.out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "config error: --out: " << e.what() << '\n';
    return 1;
  }

  for (const auto& [name, fn] : commands) {
    if (!app.got_subcommand(name)) continue;
    run.name = name;
    try {
      fn(run);
      run.sidecar();
    } catch (const ConfigError& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return 1;
    } catch (const std::exception& e) {
      std::cerr << name << ": " << e.what() << '\n';
      return 2;
    }
  }
  return 0;
}
