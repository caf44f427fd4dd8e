#include "fraccal/harness.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#ifndef FRACCAL_GIT_HASH
#define FRACCAL_GIT_HASH "unknown"
#endif

namespace fraccal {

using nlohmann::json;

double smooth_step(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  const double a = std::exp(-1.0 / t);
  const double b = std::exp(-1.0 / (1.0 - t));
  return a / (a + b);
}

namespace {

double plateau(double x, double a, double b, double w) {
  return smooth_step((x - a) / w) * smooth_step((b - x) / w);
}

}  // namespace

ExteriorSet ExteriorSet::symmetric_1d(double inner, double outer) {
  if (!(outer > inner && inner >= 0.0)) throw std::invalid_argument("exterior set: need 0 <= inner < outer");
  ExteriorSet s;
  s.dim = 1;
  s.intervals = {{-outer, -inner}, {inner, outer}};
  s.inner = inner;
  s.outer = outer;
  return s;
}

ExteriorSet ExteriorSet::frame_2d(double inner, double outer) {
  if (!(outer > inner && inner >= 0.0)) throw std::invalid_argument("exterior set: need 0 <= inner < outer");
  ExteriorSet s;
  s.dim = 2;
  s.inner = inner;
  s.outer = outer;
  return s;
}

bool ExteriorSet::contains(double x, double y) const {
  if (dim == 1)
    return std::any_of(intervals.begin(), intervals.end(), [x](const Interval& iv) { return x > iv.a && x < iv.b; });
  const double m = std::max(std::abs(x), std::abs(y));
  return m < outer && m > inner;
}

double ExteriorSet::thickness() const {
  if (dim == 2) return outer - inner;
  double t = std::numeric_limits<double>::infinity();
  for (const auto& iv : intervals) t = std::min(t, iv.b - iv.a);
  return t;
}

SpatialFunction mollified_indicator(const ExteriorSet& set, double w) {
  if (!(w > 0.0)) throw std::invalid_argument("smoothing width must be positive");
  if (!(2.0 * w < set.thickness())) throw std::invalid_argument("smoothing width too large for the set");
  if (set.dim == 1) {
    auto intervals = set.intervals;
    return [intervals, w](double x, double) {
      double v = 0.0;
      for (const auto& iv : intervals) v += plateau(x, iv.a, iv.b, w);
      return v;
    };
  }
  const double inner = set.inner;
  const double outer = set.outer;
  return [inner, outer, w](double x, double y) {
    const double o = plateau(x, -outer, outer, w) * plateau(y, -outer, outer, w);
    const double i = plateau(x, -inner - w, inner + w, w) * plateau(y, -inner - w, inner + w, w);
    return std::max(0.0, o - i);
  };
}

std::string to_string(PresetId id) {
  switch (id) {
    case PresetId::Ex41: return "ex4.1";
    case PresetId::Ex42: return "ex4.2";
    case PresetId::Ex43: return "ex4.3";
    case PresetId::Ex44: return "ex4.4";
    case PresetId::Custom: return "custom";
  }
  return "unknown";
}

PresetId parse_preset(const std::string& name) {
  for (auto id : {PresetId::Ex41, PresetId::Ex42, PresetId::Ex43, PresetId::Ex44, PresetId::Custom})
    if (to_string(id) == name) return id;
  throw std::invalid_argument("unknown example '" + name + "' (expected ex4.1, ex4.2, ex4.3, ex4.4 or custom)");
}

ExperimentPreset make_preset(PresetId id) {
  ExperimentPreset p;
  p.id = id;
  p.noise_levels = {1e-7, 1e-6, 1e-5, 1e-4, 1e-3};
  switch (id) {
    case PresetId::Ex41:
      p.q_true = [](double x, double) { return std::sin(std::numbers::pi * x); };
      break;
    case PresetId::Ex42:
      p.q_true = [](double x, double) {
        const double t = std::max(0.75 - std::abs(x), 0.0);
        return 10.0 * t * t;
      };
      p.noise_levels = {1e-7, 1e-6, 1e-5, 1e-4};
      break;
    case PresetId::Ex43:
      p.q_true = [](double x, double) { return std::abs(x) < 0.5 ? 1.0 : 0.0; };
      p.default_delta = 1e-7;
      p.noise_levels = {1e-7, 1e-6, 1e-5};
      break;
    case PresetId::Ex44:
      p.dim = 2;
      p.s = 0.5;
      p.N = 64;
      p.alpha_c = 0.1;
      p.stop_factor = 10.0;
      p.max_outer_iter = 100;
      p.default_delta = 1e-6;
      p.noise_levels = {1e-6, 1e-5, 1e-4, 1e-3};
      p.q_true = [](double x, double y) {
        const double a = std::max(0.5625 - x * x, 0.0);
        const double b = std::max(0.5625 - y * y, 0.0);
        return 100.0 * a * a * a * b * b * b;
      };
      break;
    case PresetId::Custom:
      p.q_true = [](double, double) { return 0.0; };
      break;
  }
  return p;
}

namespace {

std::string normalize_key(std::string k) {
  std::transform(k.begin(), k.end(), k.begin(), [](unsigned char c) {
    if (c == '_') return '-';
    return static_cast<char>(std::tolower(c));
  });
  while (!k.empty() && k.front() == '-') k.erase(k.begin());
  return k;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("'" + key + "' expects a number, got '" + v + "'");
  }
  if (pos != v.size()) throw std::invalid_argument("'" + key + "' expects a number, got '" + v + "'");
  return d;
}

long long to_int(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (d != std::floor(d)) throw std::invalid_argument("'" + key + "' expects an integer, got '" + v + "'");
  return static_cast<long long>(d);
}

bool to_bool(const std::string& key, std::string v) {
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw std::invalid_argument("'" + key + "' expects a boolean, got '" + v + "'");
}

// "c*delta^2" with c a number; "delta^2" means c = 1.
double parse_alpha_rule(const std::string& v) {
  std::string t;
  for (char c : v)
    if (!std::isspace(static_cast<unsigned char>(c))) t += c;
  const std::string tail = "delta^2";
  if (t.size() < tail.size() || t.compare(t.size() - tail.size(), tail.size(), tail) != 0)
    throw std::invalid_argument("alpha-rule must look like c*delta^2, got '" + v + "'");
  std::string head = t.substr(0, t.size() - tail.size());
  if (head.empty()) return 1.0;
  if (head.back() != '*') throw std::invalid_argument("alpha-rule must look like c*delta^2, got '" + v + "'");
  head.pop_back();
  const double c = to_double("alpha-rule", head);
  if (!(c > 0.0)) throw std::invalid_argument("alpha-rule constant must be positive");
  return c;
}

}  // namespace

void ExperimentConfig::set(const std::string& raw_key, const std::string& raw_value) {
  const std::string key = normalize_key(raw_key);
  const std::string v = trim(raw_value);
  if (key == "example") {
    (void)parse_preset(v);
    example = v;
  } else if (key == "n") {
    N = static_cast<int>(to_int(key, v));
  } else if (key == "data-n") {
    data_N = static_cast<int>(to_int(key, v));
  } else if (key == "gamma") {
    gamma = to_double(key, v);
  } else if (key == "delta") {
    delta = to_double(key, v);
    if (*delta < 0.0) throw std::invalid_argument("delta must be non-negative");
  } else if (key == "alpha") {
    alpha = to_double(key, v);
    if (*alpha < 0.0) throw std::invalid_argument("alpha must be non-negative");
  } else if (key == "alpha-rule") {
    alpha_c = parse_alpha_rule(v);
  } else if (key == "seed") {
    const long long s = to_int(key, v);
    if (s < 0) throw std::invalid_argument("seed must be non-negative");
    seed = static_cast<std::uint64_t>(s);
  } else if (key == "max-iter") {
    max_iter = static_cast<int>(to_int(key, v));
  } else if (key == "eps") {
    eps = to_double(key, v);
    if (!(*eps >= 0.0)) throw std::invalid_argument("eps must be non-negative");
  } else if (key == "rtol") {
    rtol = to_double(key, v);
  } else if (key == "allow-inverse-crime") {
    allow_inverse_crime = to_bool(key, v);
  } else if (key == "out") {
    out_dir = v;
  } else if (key == "format") {
    if (v != "csv" && v != "json") throw std::invalid_argument("format must be csv or json");
    format = v;
  } else if (key == "deltas") {
    deltas.clear();
    std::stringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      tok = trim(tok);
      if (!tok.empty()) deltas.push_back(to_double(key, tok));
    }
  } else {
    throw std::invalid_argument("unknown setting '" + raw_key + "'");
  }
}

ExperimentConfig parse_config(std::istream& in, ExperimentConfig base) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    try {
      base.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

ExperimentConfig load_config(const std::string& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  return parse_config(in, std::move(base));
}

ExperimentConfig apply_environment(ExperimentConfig cfg, const std::string& prefix) {
  static const char* keys[] = {"EXAMPLE", "N", "DATA_N", "GAMMA", "DELTA", "ALPHA", "ALPHA_RULE", "SEED",
                               "MAX_ITER", "EPS", "RTOL", "ALLOW_INVERSE_CRIME", "OUT", "FORMAT", "DELTAS"};
  for (const char* k : keys) {
    const std::string name = prefix + k;
    if (const char* v = std::getenv(name.c_str())) {
      try {
        cfg.set(k, v);
      } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(name + ": " + e.what());
      }
    }
  }
  return cfg;
}

ProblemSpec build_spec(const ExperimentPreset& preset, int N, double gap) {
  ProblemSpec spec;
  spec.s = preset.s;
  spec.gamma = preset.gamma;
  spec.grid = Grid::make(preset.dim, preset.L, preset.R, N);
  spec.q.assign(spec.grid.interior_count(), 0.0);
  spec.eps_gap = gap;
  spec.collar = preset.collar;
  const double inner = preset.L + gap;
  const ExteriorSet set =
      preset.dim == 1 ? ExteriorSet::symmetric_1d(inner, preset.R) : ExteriorSet::frame_2d(inner, preset.R);
  spec.f = mollified_indicator(set, preset.smoothing);
  auto inside = [set](double x, double y) { return set.contains(x, y); };
  spec.W1 = rasterize(spec.grid, inside, gap);
  spec.W2 = spec.W1;
  return spec;
}

double uniform53(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

Observation gen_noise(const NodeSet& points, std::span<const double> clean, double delta, std::uint64_t seed) {
  if (!(delta >= 0.0)) throw std::invalid_argument("noise level must be non-negative");
  if (points.size() != clean.size()) throw std::invalid_argument("noise: points and values disagree");
  Observation obs;
  obs.points = points;
  obs.values.assign(clean.begin(), clean.end());
  obs.delta = delta;
  obs.seed = seed;
  if (delta == 0.0) return obs;
  std::mt19937_64 rng(seed);
  for (auto& v : obs.values) v += delta * (2.0 * uniform53(rng()) - 1.0);
  return obs;
}

namespace {

std::vector<double> sample_interior(const Grid& g, const SpatialFunction& fn) {
  std::vector<double> out(g.interior_count());
  const int jlo = g.dim() == 2 ? 1 : 0;
  const int jhi = g.dim() == 2 ? g.N() - 1 : 0;
  for (int j = jlo; j <= jhi; ++j)
    for (int i = 1; i < g.N(); ++i)
      out[g.interior_index(i, j)] = fn(g.coord(i), g.dim() == 2 ? g.coord(j) : 0.0);
  return out;
}

struct Prepared {
  ExperimentPreset preset;
  int N = 0;
  int data_N = 0;
  std::unique_ptr<ForwardModel> model;
  std::vector<double> clean;
  std::vector<double> q_true;
  double data_seconds = 0.0;
};

Prepared prepare(const ExperimentConfig& cfg) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  Prepared p;
  p.preset = make_preset(parse_preset(cfg.example));
  auto& pr = p.preset;
  if (cfg.gamma) pr.gamma = *cfg.gamma;
  if (cfg.alpha_c) pr.alpha_c = *cfg.alpha_c;
  if (cfg.alpha) pr.alpha = *cfg.alpha;
  if (cfg.max_iter) pr.max_outer_iter = *cfg.max_iter;
  p.N = cfg.N ? *cfg.N : pr.N;
  p.data_N = cfg.data_N ? *cfg.data_N : pr.data_factor * p.N;
  if (p.data_N % p.N != 0) throw std::invalid_argument("data-N must be a multiple of N");
  if (p.data_N < 2 * p.N && !cfg.allow_inverse_crime)
    throw std::invalid_argument("data grid must be at least twice as fine as the inversion grid "
                                "(pass --allow-inverse-crime to override)");
  const int factor = p.data_N / p.N;
  KrylovOptions kopts;
  kopts.rtol = cfg.rtol;

  if (cfg.eps) pr.eps = *cfg.eps;
  const double gap = pr.eps > 0.0 ? pr.eps : 2.0 * pr.L / p.N;
  ProblemSpec coarse = build_spec(pr, p.N, gap);
  p.model = std::make_unique<ForwardModel>(coarse, kopts);

  ProblemSpec fine = build_spec(pr, p.data_N, gap);
  fine.W2.clear();
  for (const auto& n : p.model->spec().W2) fine.W2.push_back({n.i * factor, pr.dim == 2 ? n.j * factor : 0});
  fine.datum_w2 = p.model->datum_ptr();
  fine.q = sample_interior(fine.grid, pr.q_true);
  ForwardModel data_model(fine, kopts);
  const auto sol = data_model.solve(fine.q);
  p.clean = data_model.observe(sol.u.interior());
  p.q_true = sample_interior(p.model->spec().grid, pr.q_true);
  p.data_seconds = std::chrono::duration<double>(clock::now() - t0).count();
  return p;
}

RunRecord invert(const Prepared& p, const ExperimentConfig& cfg, double delta) {
  using clock = std::chrono::steady_clock;
  RunRecord rec;
  rec.preset = to_string(p.preset.id);
  rec.seed = cfg.seed;
  rec.delta = delta;
  rec.N = p.N;
  rec.data_N = p.data_N;
  rec.dim = p.preset.dim;
  rec.data_seconds = p.data_seconds;
  const Grid& g = p.model->spec().grid;

  InversionConfig ic;
  ic.delta = delta;
  if (p.preset.alpha) {
    ic.alpha_rule = AlphaRule::Explicit;
    ic.alpha = *p.preset.alpha;
  } else {
    ic.alpha_rule = AlphaRule::DeltaSquared;
    ic.alpha_c = p.preset.alpha_c;
  }
  ic.stop_factor = p.preset.stop_factor;
  ic.max_outer_iter = p.preset.max_outer_iter;
  ic.inner_rtol = cfg.rtol;
  rec.alpha = ic.effective_alpha();
  rec.stop_threshold = ic.stop_threshold();

  const auto data = gen_noise(p.model->spec().W2, p.clean, delta, cfg.seed);
  rec.noise.resize(data.values.size());
  for (std::size_t k = 0; k < rec.noise.size(); ++k) rec.noise[k] = data.values[k] - p.clean[k];

  const auto t0 = clock::now();
  const auto res = cg_reconstruct(*p.model, data, ic);
  rec.inversion_seconds = std::chrono::duration<double>(clock::now() - t0).count();
  rec.iterations = res.iterations;
  rec.stop_reason = to_string(res.reason);
  rec.E_final = res.E_final;
  rec.trace = res.state.trace;

  double linf = 0.0;
  double l2 = 0.0;
  for (std::size_t k = 0; k < res.q.size(); ++k) {
    const double e = std::abs(res.q[k] - p.q_true[k]);
    linf = std::max(linf, e);
    l2 += e * e;
  }
  rec.linf_error = linf;
  rec.l2_error = std::sqrt(l2 * std::pow(g.h(), g.dim()));

  const int jhi = g.dim() == 2 ? g.N() : 0;
  for (int j = 0; j <= jhi; ++j)
    for (int i = 0; i <= g.N(); ++i) {
      const double x = g.coord(i);
      const double y = g.dim() == 2 ? g.coord(j) : 0.0;
      rec.x.push_back(x);
      if (g.dim() == 2) rec.y.push_back(y);
      const bool in = g.is_interior(i, j);
      rec.q_true.push_back(in ? p.q_true[g.interior_index(i, j)] : 0.0);
      rec.q_rec.push_back(in ? res.q[g.interior_index(i, j)] : 0.0);
    }
  return rec;
}

double resolve_delta(const ExperimentConfig& cfg, const ExperimentPreset& p) {
  return cfg.delta ? *cfg.delta : p.default_delta;
}

}  // namespace

RunRecord run_experiment(const ExperimentConfig& cfg) {
  const auto p = prepare(cfg);
  return invert(p, cfg, resolve_delta(cfg, p.preset));
}

std::vector<SweepRow> stability_sweep(const ExperimentConfig& cfg, std::vector<RunRecord>* records) {
  const auto p = prepare(cfg);
  std::vector<double> deltas = cfg.deltas.empty() ? p.preset.noise_levels : cfg.deltas;
  if (deltas.size() < 3) throw std::invalid_argument("a stability sweep needs at least 3 noise levels");
  for (double d : deltas)
    if (!(d > 0.0 && d < 1.0)) throw std::invalid_argument("sweep noise levels must lie in (0,1)");
  std::sort(deltas.begin(), deltas.end());
  std::vector<SweepRow> rows;
  for (double d : deltas) {
    SweepRow row;
    row.delta = d;
    row.inv_log_delta = 1.0 / std::abs(std::log10(d));
    row.seed = cfg.seed;
    try {
      auto rec = invert(p, cfg, d);
      row.linf_error = rec.linf_error;
      row.l2_error = rec.l2_error;
      row.iterations = rec.iterations;
      if (records) records->push_back(std::move(rec));
    } catch (const std::exception& e) {
      row.error = e.what();
      row.linf_error = std::numeric_limits<double>::quiet_NaN();
      row.l2_error = std::numeric_limits<double>::quiet_NaN();
    }
    rows.push_back(row);
  }
  return rows;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("pearson: need two equal-length samples");
  const double n = static_cast<double>(a.size());
  double ma = 0.0;
  double mb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ma += a[k];
    mb += b[k];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    sab += (a[k] - ma) * (b[k] - mb);
    saa += (a[k] - ma) * (a[k] - ma);
    sbb += (b[k] - mb) * (b[k] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

bool RunRecord::operator==(const RunRecord& o) const {
  auto same_trace = [](const std::vector<IterationRecord>& a, const std::vector<IterationRecord>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const auto& x = a[k];
      const auto& y = b[k];
      if (x.k != y.k || x.E != y.E || x.J != y.J || x.grad_norm != y.grad_norm || x.beta != y.beta ||
          x.gamma != y.gamma || x.seconds != y.seconds || x.inner_iterations != y.inner_iterations ||
          x.restarted != y.restarted)
        return false;
    }
    return true;
  };
  return preset == o.preset && seed == o.seed && delta == o.delta && alpha == o.alpha && N == o.N &&
         data_N == o.data_N && dim == o.dim && linf_error == o.linf_error && l2_error == o.l2_error &&
         iterations == o.iterations && stop_reason == o.stop_reason && E_final == o.E_final &&
         stop_threshold == o.stop_threshold && data_seconds == o.data_seconds &&
         inversion_seconds == o.inversion_seconds && same_trace(trace, o.trace) && noise == o.noise && x == o.x &&
         y == o.y && q_true == o.q_true && q_rec == o.q_rec && outputs == o.outputs && error == o.error;
}

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json config_json(const ExperimentConfig& c) {
  json j;
  j["example"] = c.example;
  if (c.N) j["N"] = *c.N;
  if (c.data_N) j["data_N"] = *c.data_N;
  if (c.gamma) j["gamma"] = *c.gamma;
  if (c.delta) j["delta"] = *c.delta;
  if (c.alpha) j["alpha"] = *c.alpha;
  if (c.alpha_c) j["alpha_c"] = *c.alpha_c;
  j["seed"] = c.seed;
  if (c.max_iter) j["max_iter"] = *c.max_iter;
  if (c.eps) j["eps"] = *c.eps;
  j["rtol"] = c.rtol;
  j["allow_inverse_crime"] = c.allow_inverse_crime;
  j["format"] = c.format;
  if (!c.deltas.empty()) j["deltas"] = c.deltas;
  return j;
}

json metadata(const ExperimentConfig* cfg) {
  json m;
  m["git_hash"] = FRACCAL_GIT_HASH;
  if (cfg) m["config"] = config_json(*cfg);
  return m;
}

}  // namespace

void write_reconstruction_csv(std::ostream& os, const RunRecord& rec) {
  os << (rec.dim == 2 ? "x,y,q_true,q_rec,abs_err\n" : "x,q_true,q_rec,abs_err\n");
  for (std::size_t k = 0; k < rec.x.size(); ++k) {
    os << num(rec.x[k]) << ',';
    if (rec.dim == 2) os << num(rec.y[k]) << ',';
    os << num(rec.q_true[k]) << ',' << num(rec.q_rec[k]) << ',' << num(std::abs(rec.q_rec[k] - rec.q_true[k]))
       << '\n';
  }
}

void write_trace_csv(std::ostream& os, const RunRecord& rec) {
  os << "k,E,J,grad_norm,beta,gamma,seconds,inner_iterations,restarted\n";
  for (const auto& t : rec.trace)
    os << t.k << ',' << num(t.E) << ',' << num(t.J) << ',' << num(t.grad_norm) << ',' << num(t.beta) << ','
       << num(t.gamma) << ',' << num(t.seconds) << ',' << t.inner_iterations << ',' << (t.restarted ? 1 : 0)
       << '\n';
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "delta,inv_log_delta,linf_err,l2_err,iters,seed\n";
  for (const auto& r : rows)
    os << num(r.delta) << ',' << num(r.inv_log_delta) << ',' << num(r.linf_error) << ',' << num(r.l2_error) << ','
       << r.iterations << ',' << r.seed << '\n';
}

std::string record_to_json(const RunRecord& rec, const ExperimentConfig* cfg) {
  json j;
  j["metadata"] = metadata(cfg);
  j["preset"] = rec.preset;
  j["seed"] = rec.seed;
  j["delta"] = rec.delta;
  j["alpha"] = rec.alpha;
  j["N"] = rec.N;
  j["data_N"] = rec.data_N;
  j["dim"] = rec.dim;
  j["linf_error"] = rec.linf_error;
  j["l2_error"] = rec.l2_error;
  j["iterations"] = rec.iterations;
  j["stop_reason"] = rec.stop_reason;
  j["E_final"] = rec.E_final;
  j["stop_threshold"] = rec.stop_threshold;
  j["data_seconds"] = rec.data_seconds;
  j["inversion_seconds"] = rec.inversion_seconds;
  json tr = json::array();
  for (const auto& t : rec.trace)
    tr.push_back({{"k", t.k},
                  {"E", t.E},
                  {"J", t.J},
                  {"grad_norm", t.grad_norm},
                  {"beta", t.beta},
                  {"gamma", t.gamma},
                  {"seconds", t.seconds},
                  {"inner_iterations", t.inner_iterations},
                  {"restarted", t.restarted}});
  j["trace"] = tr;
  j["noise"] = rec.noise;
  j["x"] = rec.x;
  j["y"] = rec.y;
  j["q_true"] = rec.q_true;
  j["q_rec"] = rec.q_rec;
  j["outputs"] = rec.outputs;
  j["error"] = rec.error;
  return j.dump(2);
}

RunRecord record_from_json(const std::string& text) {
  const json j = json::parse(text);
  RunRecord rec;
  rec.preset = j.at("preset").get<std::string>();
  rec.seed = j.at("seed").get<std::uint64_t>();
  rec.delta = j.at("delta").get<double>();
  rec.alpha = j.at("alpha").get<double>();
  rec.N = j.at("N").get<int>();
  rec.data_N = j.at("data_N").get<int>();
  rec.dim = j.at("dim").get<int>();
  rec.linf_error = j.at("linf_error").get<double>();
  rec.l2_error = j.at("l2_error").get<double>();
  rec.iterations = j.at("iterations").get<int>();
  rec.stop_reason = j.at("stop_reason").get<std::string>();
  rec.E_final = j.at("E_final").get<double>();
  rec.stop_threshold = j.at("stop_threshold").get<double>();
  rec.data_seconds = j.at("data_seconds").get<double>();
  rec.inversion_seconds = j.at("inversion_seconds").get<double>();
  for (const auto& t : j.at("trace")) {
    IterationRecord r;
    r.k = t.at("k").get<int>();
    r.E = t.at("E").get<double>();
    r.J = t.at("J").get<double>();
    r.grad_norm = t.at("grad_norm").get<double>();
    r.beta = t.at("beta").get<double>();
    r.gamma = t.at("gamma").get<double>();
    r.seconds = t.at("seconds").get<double>();
    r.inner_iterations = t.at("inner_iterations").get<int>();
    r.restarted = t.at("restarted").get<bool>();
    rec.trace.push_back(r);
  }
  rec.noise = j.at("noise").get<std::vector<double>>();
  rec.x = j.at("x").get<std::vector<double>>();
  rec.y = j.at("y").get<std::vector<double>>();
  rec.q_true = j.at("q_true").get<std::vector<double>>();
  rec.q_rec = j.at("q_rec").get<std::vector<double>>();
  rec.outputs = j.at("outputs").get<std::vector<std::string>>();
  rec.error = j.at("error").get<std::string>();
  return rec;
}

std::string sweep_to_json(const std::vector<SweepRow>& rows, const ExperimentConfig* cfg) {
  json j;
  j["metadata"] = metadata(cfg);
  json arr = json::array();
  for (const auto& r : rows) {
    json row{{"delta", r.delta},
             {"inv_log_delta", r.inv_log_delta},
             {"linf_err", std::isfinite(r.linf_error) ? json(r.linf_error) : json(nullptr)},
             {"l2_err", std::isfinite(r.l2_error) ? json(r.l2_error) : json(nullptr)},
             {"iters", r.iterations},
             {"seed", r.seed}};
    if (!r.error.empty()) row["error"] = r.error;
    arr.push_back(row);
  }
  j["rows"] = arr;
  return j.dump(2);
}

namespace {

std::filesystem::path out_dir_of(const ExperimentConfig& cfg) {
  std::filesystem::path dir = cfg.out_dir.empty() ? std::filesystem::path(".") : std::filesystem::path(cfg.out_dir);
  std::filesystem::create_directories(dir);
  return dir;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << text;
  if (!os) throw std::runtime_error("write failed for " + p.string());
}

std::string stem_of(const RunRecord& rec) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_delta%.0e_seed%llu", rec.preset.c_str(), rec.delta,
                static_cast<unsigned long long>(rec.seed));
  return buf;
}

}  // namespace

void export_record(RunRecord& rec, const ExperimentConfig& cfg) {
  const auto dir = out_dir_of(cfg);
  const std::string stem = stem_of(rec);
  if (cfg.format == "json") {
    const auto path = dir / (stem + ".json");
    rec.outputs.push_back(path.string());
    write_file(path, record_to_json(rec, &cfg));
    return;
  }
  const auto recon = dir / (stem + "_reconstruction.csv");
  const auto trace = dir / (stem + "_trace.csv");
  rec.outputs.push_back(recon.string());
  rec.outputs.push_back(trace.string());
  std::ostringstream a;
  write_reconstruction_csv(a, rec);
  write_file(recon, a.str());
  std::ostringstream b;
  write_trace_csv(b, rec);
  write_file(trace, b.str());
}

std::vector<std::string> export_sweep(const std::vector<SweepRow>& rows, const ExperimentConfig& cfg) {
  const auto dir = out_dir_of(cfg);
  const auto path = dir / (cfg.example + (cfg.format == "json" ? "_sweep.json" : "_sweep.csv"));
  if (cfg.format == "json") {
    write_file(path, sweep_to_json(rows, &cfg));
  } else {
    std::ostringstream os;
    write_sweep_csv(os, rows);
    write_file(path, os.str());
  }
  return {path.string()};
}

}  // namespace fraccal
