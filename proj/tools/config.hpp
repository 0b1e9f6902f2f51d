#pragma once

// Run configuration for the command-line front end: YAML in, every key
// checked, defaults filled, and the resolved result echoed back as JSON
// in the same layout so a run can be repeated from its own sidecar.

#include "toalab/compare.hpp"
#include "toalab/hom.hpp"
#include "toalab/potential.hpp"

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace toalab::cli {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using json = nlohmann::ordered_json;

// Lab units for particle runs: nm, eV, fs, electron masses. Wavenumbers
// in 1/nm equal natural momenta when the natural length is 1 nm.
struct Units {
  std::string name = "natural";
  double energy = 1.0;  // lab energy per natural energy unit
  double time = 1.0;    // lab time per natural time unit

  static Units from_name(const std::string& n) {
    if (n == "natural") return {};
    if (n == "lab") {
      constexpr double hbar_ev_fs = 0.6582119569;
      constexpr double hbar2_over_me_ev_nm2 = 0.07619964231;
      return {"lab", hbar2_over_me_ev_nm2, hbar_ev_fs / hbar2_over_me_ev_nm2};
    }
    throw ConfigError("units: expected 'natural' or 'lab', got '" + n + "'");
  }
};

struct ToaSection {
  double detector = 10.0;
  std::int64_t points = 1601;
  std::optional<double> t_min, t_max;  // empty: chosen from the packet
  bool auto_widen = true;
};

struct HartmanSection {
  double height = 1.0;
  std::vector<double> widths{5.0, 10.0};
  double barrier_start = 0.0;
  double detector_offset = 5.0;
};

struct ResonancesSection {
  KBox box{0.1, 3.0, -0.5, -1e-4};
  std::int64_t max_poles = 10;
  std::int64_t edge_points = 256;
  bool breit_wigner = true;
};

struct TdseSection {
  Domain domain{-50.0, 50.0, 0.01};
  double dt = 0.01;
  double t_max = 10.0;
  Absorber absorber{false, 3.0, 0.1};
  std::vector<double> detectors;
  std::vector<Region> regions;
  std::int64_t output_stride = 10;
};

struct CompareSection {
  std::string mode = "resonance";  // or "overlay"
  double detector = 8.0;
  Domain domain{-160.0, 163.0, 0.01};
  double dt = 0.01;
  double t_max = 200.0;
  Absorber absorber{true, 3.0, 0.1};
  KBox box{0.1, 3.0, -0.5, -1e-4};
  std::optional<Region> cavity;
  double trapped_fit_from = 30.0, trapped_fit_to = 100.0;
  double flux_fit_from = 20.0, flux_fit_to = 100.0;
  double tail_from = 30.0;
  double toa_extension = 20.0;
  std::int64_t output_stride = 10;
};

struct BiphotonSection {
  double gamma = 0.1;
  double delta_omega = 1.0;
  std::int64_t n_atom = 512, n_photon = 512;
  double atom_half_span = 4.0;
  double photon_half_span = 0.0;
  double tail_target = 1e-5;
  std::int64_t modes = 4;
  double gamma_t = 5.0;
  std::int64_t profile_points = 2001;
  double tail_decades = 3.0;
};

struct StackSection {
  bool enabled = true;
  double n_high = 2.25;
  double n_low = 1.45;
  std::int64_t periods = 5;
  double exterior = 1.0;
};

struct HomSection {
  double wavelength_um = 0.702;
  double width_fs = 20.0;         // calibration target, used when sigma is absent
  std::optional<double> sigma;    // rad/fs
  std::int64_t spectral_points = 513;
  double delay_min = -60.0, delay_max = 60.0;
  std::int64_t delay_points = 1201;
  StackSection stack;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string units = "natural";
  double origin = 0.0;
  std::vector<Segment> segments;  // resolved potential
  WavePacket packet{1.0, 0.02, 0.0, 1.0};
  ToaSection toa;
  HartmanSection hartman;
  ResonancesSection resonances;
  TdseSection tdse;
  CompareSection compare;
  BiphotonSection biphoton;
  HomSection hom;

  [[nodiscard]] PotentialSpec potential() const { return PotentialSpec::particle(segments, origin); }
};

namespace detail {

// Map reader that remembers which keys were consumed.
class Section {
 public:
  Section(const YAML::Node& node, std::string path) : node_(node), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) throw ConfigError(where() + "expected a mapping");
  }

  [[nodiscard]] bool has(const std::string& key) {
    used_.insert(key);
    return node_ && node_.IsMap() && node_[key] && !node_[key].IsNull();
  }
  [[nodiscard]] YAML::Node raw(const std::string& key) {
    used_.insert(key);
    return node_ && node_.IsMap() ? node_[key] : YAML::Node();
  }
  [[nodiscard]] std::string key_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void number(const std::string& key, double& out) {
    if (has(key)) out = scalar<double>(key);
  }
  void number(const std::string& key, std::optional<double>& out) {
    if (has(key)) out = scalar<double>(key);
  }
  void integer(const std::string& key, std::int64_t& out) {
    if (has(key)) out = scalar<std::int64_t>(key);
  }
  void flag(const std::string& key, bool& out) {
    if (has(key)) out = scalar<bool>(key);
  }
  void text(const std::string& key, std::string& out) {
    if (has(key)) out = scalar<std::string>(key);
  }
  void numbers(const std::string& key, std::vector<double>& out) {
    if (!has(key)) return;
    const YAML::Node n = node_[key];
    if (!n.IsSequence()) throw ConfigError(key_path(key) + ": expected a list of numbers");
    out.clear();
    for (std::size_t i = 0; i < n.size(); ++i) {
      try {
        out.push_back(n[i].as<double>());
      } catch (const YAML::Exception&) {
        throw ConfigError(key_path(key) + "[" + std::to_string(i) + "]: expected a number");
      }
    }
  }

  void done() const {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const auto k = kv.first.as<std::string>();
      if (!used_.count(k)) throw ConfigError(key_path(k) + ": unknown key");
    }
  }

 private:
  template <class T>
  T scalar(const std::string& key) {
    const YAML::Node n = node_[key];
    try {
      if (!n.IsScalar()) throw YAML::Exception(YAML::Mark::null_mark(), "");
      return n.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(key_path(key) + ": bad value");
    }
  }
  [[nodiscard]] std::string where() const { return path_.empty() ? "" : path_ + ": "; }

  YAML::Node node_;
  std::string path_;
  std::set<std::string> used_;
};

inline void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key + ": " + what);
}

inline void positive(double v, const std::string& key) { require(v > 0.0 && std::isfinite(v), key, "must be positive"); }
inline void finite(double v, const std::string& key) { require(std::isfinite(v), key, "must be finite"); }
inline void at_least(std::int64_t v, std::int64_t lo, const std::string& key) {
  require(v >= lo, key, "must be at least " + std::to_string(lo));
}

inline void read_box(Section& parent, const std::string& key, KBox& box) {
  Section s(parent.raw(key), parent.key_path(key));
  s.number("re_min", box.re_min);
  s.number("re_max", box.re_max);
  s.number("im_min", box.im_min);
  s.number("im_max", box.im_max);
  s.done();
  const auto p = parent.key_path(key);
  require(box.re_max > box.re_min && box.im_max > box.im_min, p, "empty box");
}

inline void read_domain(Section& parent, const std::string& key, Domain& d) {
  Section s(parent.raw(key), parent.key_path(key));
  s.number("x_min", d.x_min);
  s.number("x_max", d.x_max);
  s.number("dx", d.dx);
  s.done();
  positive(d.dx, s.key_path("dx"));
  require(d.x_max > d.x_min, parent.key_path(key), "x_max must exceed x_min");
}

inline void read_absorber(Section& parent, const std::string& key, Absorber& a) {
  Section s(parent.raw(key), parent.key_path(key));
  s.flag("enabled", a.enabled);
  s.number("strength", a.strength);
  s.number("fraction", a.fraction);
  s.done();
  positive(a.strength, s.key_path("strength"));
  require(a.fraction > 0.0 && a.fraction < 0.5, s.key_path("fraction"), "must lie in (0, 0.5)");
}

inline Region read_region(const YAML::Node& n, const std::string& path) {
  Section s(n, path);
  Region r;
  require(s.has("a") && s.has("b"), path, "needs both a and b");
  s.number("a", r.a);
  s.number("b", r.b);
  s.done();
  require(r.b >= r.a, path, "b must not be below a");
  return r;
}

inline void read_window(Section& parent, const std::string& key, double& from, double& to) {
  Section s(parent.raw(key), parent.key_path(key));
  s.number("from", from);
  s.number("to", to);
  s.done();
  require(to > from, parent.key_path(key), "'to' must exceed 'from'");
}

inline void read_potential(Section& root, RunConfig& c) {
  Section s(root.raw("potential"), "potential");
  std::string kind = "segments";
  s.text("kind", kind);
  s.number("origin", c.origin);
  finite(c.origin, "potential.origin");
  if (kind == "free") {
    c.segments.clear();
  } else if (kind == "segments") {
    const YAML::Node list = s.raw("segments");
    c.segments.clear();
    if (list && !list.IsNull()) {
      if (!list.IsSequence()) throw ConfigError("potential.segments: expected a list");
      for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string p = "potential.segments[" + std::to_string(i) + "]";
        Section seg(list[i], p);
        Segment g{0.0, 0.0};
        require(seg.has("width") && seg.has("value"), p, "needs width and value");
        seg.number("width", g.width);
        seg.number("value", g.value);
        seg.done();
        positive(g.width, p + ".width");
        finite(g.value, p + ".value");
        c.segments.push_back(g);
      }
    }
  } else if (kind == "rectangular") {
    double h = 1.0, w = 1.0;
    s.number("height", h);
    s.number("width", w);
    positive(w, "potential.width");
    finite(h, "potential.height");
    c.segments = {{w, h}};
  } else if (kind == "double_barrier") {
    double h = 4.0, bw = 0.5, gap = 2.0;
    s.number("height", h);
    s.number("barrier_width", bw);
    s.number("gap", gap);
    positive(bw, "potential.barrier_width");
    positive(gap, "potential.gap");
    finite(h, "potential.height");
    c.segments = double_barrier(h, bw, gap).segments;
  } else {
    throw ConfigError("potential.kind: expected free, segments, rectangular or double_barrier");
  }
  s.done();
}

}  // namespace detail

inline RunConfig parse_config(const YAML::Node& doc) {
  using namespace detail;
  if (!doc || doc.IsNull()) return {};
  YAML::Node top = doc;
  // A sidecar written by an earlier run: take its resolved config.
  if (doc.IsMap() && doc["tool"] && doc["config"]) top = doc["config"];

  RunConfig c;
  Section root(top, "");
  if (root.has("seed")) {
    std::string s;
    root.text("seed", s);
    const bool digits = !s.empty() && s.size() <= 20 && s.find_first_not_of("0123456789") == std::string::npos;
    require(digits, "seed", "must be an unsigned 64-bit integer");
    try {
      c.seed = std::stoull(s);
    } catch (const std::exception&) {
      throw ConfigError("seed: must be an unsigned 64-bit integer");
    }
  }
  root.text("units", c.units);
  Units::from_name(c.units);
  read_potential(root, c);

  {
    Section s(root.raw("packet"), "packet");
    s.number("p0", c.packet.p0);
    s.number("sigma_p", c.packet.sigma_p);
    s.number("q0", c.packet.q0);
    s.number("mass", c.packet.mass);
    s.done();
    finite(c.packet.p0, "packet.p0");
    positive(c.packet.sigma_p, "packet.sigma_p");
    finite(c.packet.q0, "packet.q0");
    positive(c.packet.mass, "packet.mass");
  }
  {
    auto& t = c.toa;
    Section s(root.raw("toa"), "toa");
    s.number("detector", t.detector);
    s.integer("points", t.points);
    s.number("t_min", t.t_min);
    s.number("t_max", t.t_max);
    s.flag("auto_widen", t.auto_widen);
    s.done();
    finite(t.detector, "toa.detector");
    at_least(t.points, 3, "toa.points");
    require(t.t_min.has_value() == t.t_max.has_value(), "toa", "give both t_min and t_max or neither");
    if (t.t_min) require(*t.t_max > *t.t_min, "toa.t_max", "must exceed t_min");
  }
  {
    auto& h = c.hartman;
    Section s(root.raw("hartman"), "hartman");
    s.number("height", h.height);
    s.numbers("widths", h.widths);
    s.number("barrier_start", h.barrier_start);
    s.number("detector_offset", h.detector_offset);
    s.done();
    positive(h.height, "hartman.height");
    require(!h.widths.empty(), "hartman.widths", "must not be empty");
    for (std::size_t i = 0; i < h.widths.size(); ++i) {
      require(h.widths[i] >= 0.0, "hartman.widths", "must be non-negative");
      if (i > 0) require(h.widths[i] >= h.widths[i - 1], "hartman.widths", "must be non-decreasing");
    }
    require(h.detector_offset >= 0.0, "hartman.detector_offset", "must be non-negative");
  }
  {
    auto& r = c.resonances;
    Section s(root.raw("resonances"), "resonances");
    read_box(s, "box", r.box);
    s.integer("max_poles", r.max_poles);
    s.integer("edge_points", r.edge_points);
    s.flag("breit_wigner", r.breit_wigner);
    s.done();
    at_least(r.max_poles, 1, "resonances.max_poles");
    at_least(r.edge_points, 16, "resonances.edge_points");
  }
  {
    auto& t = c.tdse;
    Section s(root.raw("tdse"), "tdse");
    read_domain(s, "domain", t.domain);
    s.number("dt", t.dt);
    s.number("t_max", t.t_max);
    read_absorber(s, "absorber", t.absorber);
    s.numbers("detectors", t.detectors);
    if (s.has("regions")) {
      const YAML::Node list = s.raw("regions");
      if (!list.IsSequence()) throw ConfigError("tdse.regions: expected a list");
      t.regions.clear();
      for (std::size_t i = 0; i < list.size(); ++i)
        t.regions.push_back(read_region(list[i], "tdse.regions[" + std::to_string(i) + "]"));
    }
    s.integer("output_stride", t.output_stride);
    s.done();
    positive(t.dt, "tdse.dt");
    positive(t.t_max, "tdse.t_max");
    at_least(t.output_stride, 1, "tdse.output_stride");
  }
  {
    auto& m = c.compare;
    Section s(root.raw("compare"), "compare");
    s.text("mode", m.mode);
    require(m.mode == "resonance" || m.mode == "overlay", "compare.mode", "expected resonance or overlay");
    s.number("detector", m.detector);
    read_domain(s, "domain", m.domain);
    s.number("dt", m.dt);
    s.number("t_max", m.t_max);
    read_absorber(s, "absorber", m.absorber);
    read_box(s, "box", m.box);
    if (s.has("cavity")) m.cavity = read_region(s.raw("cavity"), "compare.cavity");
    read_window(s, "trapped_fit", m.trapped_fit_from, m.trapped_fit_to);
    read_window(s, "flux_fit", m.flux_fit_from, m.flux_fit_to);
    s.number("tail_from", m.tail_from);
    s.number("toa_extension", m.toa_extension);
    s.integer("output_stride", m.output_stride);
    s.done();
    finite(m.detector, "compare.detector");
    positive(m.dt, "compare.dt");
    positive(m.t_max, "compare.t_max");
    require(m.tail_from >= 0.0 && m.tail_from < m.t_max, "compare.tail_from", "must lie inside [0, t_max)");
    positive(m.toa_extension, "compare.toa_extension");
    at_least(m.output_stride, 1, "compare.output_stride");
  }
  {
    auto& b = c.biphoton;
    Section s(root.raw("biphoton"), "biphoton");
    s.number("gamma", b.gamma);
    s.number("delta_omega", b.delta_omega);
    s.integer("n_atom", b.n_atom);
    s.integer("n_photon", b.n_photon);
    s.number("atom_half_span", b.atom_half_span);
    s.number("photon_half_span", b.photon_half_span);
    s.number("tail_target", b.tail_target);
    s.integer("modes", b.modes);
    s.number("gamma_t", b.gamma_t);
    s.integer("profile_points", b.profile_points);
    s.number("tail_decades", b.tail_decades);
    s.done();
    positive(b.gamma, "biphoton.gamma");
    positive(b.delta_omega, "biphoton.delta_omega");
    at_least(b.n_atom, 8, "biphoton.n_atom");
    at_least(b.n_photon, 8, "biphoton.n_photon");
    positive(b.atom_half_span, "biphoton.atom_half_span");
    require(b.photon_half_span >= 0.0, "biphoton.photon_half_span", "must be non-negative (0 = automatic)");
    positive(b.tail_target, "biphoton.tail_target");
    at_least(b.modes, 1, "biphoton.modes");
    require(b.modes <= std::min(b.n_atom, b.n_photon), "biphoton.modes", "exceeds the grid rank");
    positive(b.gamma_t, "biphoton.gamma_t");
    at_least(b.profile_points, 11, "biphoton.profile_points");
    positive(b.tail_decades, "biphoton.tail_decades");
  }
  {
    auto& h = c.hom;
    Section s(root.raw("hom"), "hom");
    s.number("wavelength_um", h.wavelength_um);
    s.number("width_fs", h.width_fs);
    s.number("sigma", h.sigma);
    s.integer("spectral_points", h.spectral_points);
    s.number("delay_min", h.delay_min);
    s.number("delay_max", h.delay_max);
    s.integer("delay_points", h.delay_points);
    {
      auto& k = h.stack;
      Section st(s.raw("stack"), "hom.stack");
      st.flag("enabled", k.enabled);
      st.number("n_high", k.n_high);
      st.number("n_low", k.n_low);
      st.integer("periods", k.periods);
      st.number("exterior", k.exterior);
      st.done();
      positive(k.n_high, "hom.stack.n_high");
      positive(k.n_low, "hom.stack.n_low");
      at_least(k.periods, 0, "hom.stack.periods");
      positive(k.exterior, "hom.stack.exterior");
    }
    s.done();
    positive(h.wavelength_um, "hom.wavelength_um");
    positive(h.width_fs, "hom.width_fs");
    if (h.sigma) positive(*h.sigma, "hom.sigma");
    at_least(h.spectral_points, 3, "hom.spectral_points");
    require(h.delay_max > h.delay_min, "hom.delay_max", "must exceed delay_min");
    at_least(h.delay_points, 3, "hom.delay_points");
  }
  root.done();
  return c;
}

inline RunConfig load_config(const std::string& path) {
  YAML::Node doc;
  try {
    doc = YAML::LoadFile(path);
  } catch (const YAML::BadFile&) {
    throw ConfigError("cannot read config file '" + path + "'");
  } catch (const YAML::ParserException& e) {
    throw ConfigError("config syntax: " + std::string(e.what()));
  }
  return parse_config(doc);
}

namespace detail {

inline json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
inline json box_json(const KBox& b) {
  return {{"re_min", b.re_min}, {"re_max", b.re_max}, {"im_min", b.im_min}, {"im_max", b.im_max}};
}
inline json domain_json(const Domain& d) { return {{"x_min", d.x_min}, {"x_max", d.x_max}, {"dx", d.dx}}; }
inline json absorber_json(const Absorber& a) {
  return {{"enabled", a.enabled}, {"strength", a.strength}, {"fraction", a.fraction}};
}
inline json region_json(const Region& r) { return {{"a", r.a}, {"b", r.b}}; }

}  // namespace detail

/// Fully resolved configuration in the input layout.
inline json to_json(const RunConfig& c) {
  using namespace detail;
  json segs = json::array();
  for (const auto& s : c.segments) segs.push_back({{"width", s.width}, {"value", s.value}});
  json regions = json::array();
  for (const auto& r : c.tdse.regions) regions.push_back(region_json(r));

  json j;
  j["seed"] = c.seed;
  j["units"] = c.units;
  j["potential"] = {{"kind", "segments"}, {"origin", c.origin}, {"segments", segs}};
  j["packet"] = {{"p0", c.packet.p0}, {"sigma_p", c.packet.sigma_p}, {"q0", c.packet.q0}, {"mass", c.packet.mass}};
  j["toa"] = {{"detector", c.toa.detector},
              {"points", c.toa.points},
              {"t_min", opt(c.toa.t_min)},
              {"t_max", opt(c.toa.t_max)},
              {"auto_widen", c.toa.auto_widen}};
  j["hartman"] = {{"height", c.hartman.height},
                  {"widths", c.hartman.widths},
                  {"barrier_start", c.hartman.barrier_start},
                  {"detector_offset", c.hartman.detector_offset}};
  j["resonances"] = {{"box", box_json(c.resonances.box)},
                     {"max_poles", c.resonances.max_poles},
                     {"edge_points", c.resonances.edge_points},
                     {"breit_wigner", c.resonances.breit_wigner}};
  j["tdse"] = {{"domain", domain_json(c.tdse.domain)},
               {"dt", c.tdse.dt},
               {"t_max", c.tdse.t_max},
               {"absorber", absorber_json(c.tdse.absorber)},
               {"detectors", c.tdse.detectors},
               {"regions", regions},
               {"output_stride", c.tdse.output_stride}};
  const auto& m = c.compare;
  j["compare"] = {{"mode", m.mode},
                  {"detector", m.detector},
                  {"domain", domain_json(m.domain)},
                  {"dt", m.dt},
                  {"t_max", m.t_max},
                  {"absorber", absorber_json(m.absorber)},
                  {"box", box_json(m.box)},
                  {"cavity", m.cavity ? region_json(*m.cavity) : json(nullptr)},
                  {"trapped_fit", {{"from", m.trapped_fit_from}, {"to", m.trapped_fit_to}}},
                  {"flux_fit", {{"from", m.flux_fit_from}, {"to", m.flux_fit_to}}},
                  {"tail_from", m.tail_from},
                  {"toa_extension", m.toa_extension},
                  {"output_stride", m.output_stride}};
  const auto& b = c.biphoton;
  j["biphoton"] = {{"gamma", b.gamma},
                   {"delta_omega", b.delta_omega},
                   {"n_atom", b.n_atom},
                   {"n_photon", b.n_photon},
                   {"atom_half_span", b.atom_half_span},
                   {"photon_half_span", b.photon_half_span},
                   {"tail_target", b.tail_target},
                   {"modes", b.modes},
                   {"gamma_t", b.gamma_t},
                   {"profile_points", b.profile_points},
                   {"tail_decades", b.tail_decades}};
  const auto& h = c.hom;
  j["hom"] = {{"wavelength_um", h.wavelength_um},
              {"width_fs", h.width_fs},
              {"sigma", opt(h.sigma)},
              {"spectral_points", h.spectral_points},
              {"delay_min", h.delay_min},
              {"delay_max", h.delay_max},
              {"delay_points", h.delay_points},
              {"stack",
               {{"enabled", h.stack.enabled},
                {"n_high", h.stack.n_high},
                {"n_low", h.stack.n_low},
                {"periods", h.stack.periods},
                {"exterior", h.stack.exterior}}}};
  return j;
}

}  // namespace toalab::cli
