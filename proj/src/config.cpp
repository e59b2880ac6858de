#include "delaygame/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace delaygame {

using nlohmann::json;

namespace {

std::string shape(Eigen::Index r, Eigen::Index c) { return std::to_string(r) + "x" + std::to_string(c); }

// Collects every violation while reading; missing optional entries keep their defaults.
class Reader {
 public:
  std::vector<std::string> errors;

  void fail(const std::string& path, const std::string& what) { errors.push_back(path + ": " + what); }

  const json* find(const json& obj, const std::string& key) const {
    if (!obj.is_object()) return nullptr;
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
  }

  const json* section(const json& doc, const std::string& key, bool required) {
    const json* s = find(doc, key);
    if (!s) {
      if (required) fail(key, "missing section");
      return nullptr;
    }
    if (!s->is_object()) {
      fail(key, "must be an object");
      return nullptr;
    }
    return s;
  }

  double number(const json* obj, const std::string& path, const std::string& key, double def,
                bool required = false) {
    const json* v = obj ? find(*obj, key) : nullptr;
    if (!v) {
      if (required) fail(path + "." + key, "missing");
      return def;
    }
    if (!v->is_number()) {
      fail(path + "." + key, "must be a number");
      return def;
    }
    return v->get<double>();
  }

  long long integer(const json* obj, const std::string& path, const std::string& key, long long def,
                    bool required = false) {
    const json* v = obj ? find(*obj, key) : nullptr;
    if (!v) {
      if (required) fail(path + "." + key, "missing");
      return def;
    }
    if (!v->is_number_integer()) {
      fail(path + "." + key, "must be an integer");
      return def;
    }
    return v->get<long long>();
  }

  std::uint64_t seed(const json* obj, const std::string& path, const std::string& key,
                     std::uint64_t def) {
    const json* v = obj ? find(*obj, key) : nullptr;
    if (!v) return def;
    if (v->is_number_unsigned()) return v->get<std::uint64_t>();
    fail(path + "." + key, "must be a non-negative integer");
    return def;
  }

  std::string text(const json* obj, const std::string& path, const std::string& key,
                   const std::string& def, const std::set<std::string>& allowed) {
    const json* v = obj ? find(*obj, key) : nullptr;
    if (!v) return def;
    if (!v->is_string() || !allowed.count(v->get<std::string>())) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      fail(path + "." + key, "must be one of " + list);
      return def;
    }
    return v->get<std::string>();
  }

  // number | {"form": "constant" | "linear" | "piecewise", ...}
  TimeFunction time_function(const json& v, const std::string& path) {
    if (v.is_number()) return TimeFunction(v.get<double>());
    if (!v.is_object() || !v.contains("form") || !v["form"].is_string()) {
      fail(path, "expected a number or an object with a \"form\"");
      return {};
    }
    const std::string form = v["form"].get<std::string>();
    if (form == "constant") return TimeFunction(number(&v, path, "value", 0.0, true));
    if (form == "linear") {
      return TimeFunction::linear(number(&v, path, "intercept", 0.0, true),
                                  number(&v, path, "slope", 0.0, true));
    }
    if (form == "piecewise") {
      const auto breaks = numbers(v, path, "breaks");
      const auto values = numbers(v, path, "values");
      if (breaks.empty() || breaks.size() != values.size()) {
        fail(path, "piecewise form needs equally long non-empty \"breaks\" and \"values\"");
        return {};
      }
      if (!std::is_sorted(breaks.begin(), breaks.end())) {
        fail(path + ".breaks", "must be increasing");
        return {};
      }
      return TimeFunction::piecewise(breaks, values);
    }
    fail(path + ".form", "unknown form \"" + form + "\" (constant, linear, piecewise)");
    return {};
  }

  TimeFunction time_function(const json* obj, const std::string& path, const std::string& key,
                             TimeFunction def) {
    const json* v = obj ? find(*obj, key) : nullptr;
    return v ? time_function(*v, path + "." + key) : def;
  }

  std::vector<double> numbers(const json& obj, const std::string& path, const std::string& key) {
    std::vector<double> out;
    const json* v = find(obj, key);
    if (!v) return out;
    if (!v->is_array()) {
      fail(path + "." + key, "must be an array of numbers");
      return out;
    }
    for (const auto& x : *v) {
      if (!x.is_number()) {
        fail(path + "." + key, "must be an array of numbers");
        return {};
      }
      out.push_back(x.get<double>());
    }
    return out;
  }

  // number (1x1) | flat array (column) | nested arrays (rows) | {"rows", "cols", "data"}
  std::optional<Mat> matrix(const json& v, const std::string& path) {
    if (v.is_number()) return Mat::Constant(1, 1, v.get<double>());
    const json* data = &v;
    long long rows = -1, cols = -1;
    if (v.is_object()) {
      rows = integer(&v, path, "rows", -1, true);
      cols = integer(&v, path, "cols", -1, true);
      data = find(v, "data");
      if (!data) {
        fail(path + ".data", "missing");
        return std::nullopt;
      }
    }
    if (!data->is_array() || data->empty()) {
      fail(path, "expected a number, an array or {rows, cols, data}");
      return std::nullopt;
    }
    Mat m;
    if ((*data)[0].is_array()) {
      const auto r = static_cast<Eigen::Index>(data->size());
      const auto c = static_cast<Eigen::Index>((*data)[0].size());
      m.resize(r, c);
      for (Eigen::Index i = 0; i < r; ++i) {
        const json& row = (*data)[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != c) {
          fail(path, "rows of unequal length");
          return std::nullopt;
        }
        for (Eigen::Index j = 0; j < c; ++j) {
          if (!row[static_cast<std::size_t>(j)].is_number()) {
            fail(path, "entries must be numbers");
            return std::nullopt;
          }
          m(i, j) = row[static_cast<std::size_t>(j)].get<double>();
        }
      }
    } else {
      m.resize(static_cast<Eigen::Index>(data->size()), 1);
      for (std::size_t i = 0; i < data->size(); ++i) {
        if (!(*data)[i].is_number()) {
          fail(path, "entries must be numbers");
          return std::nullopt;
        }
        m(static_cast<Eigen::Index>(i), 0) = (*data)[i].get<double>();
      }
    }
    if (rows >= 0 && cols >= 0 && (m.rows() != rows || m.cols() != cols)) {
      fail(path, "data is " + shape(m.rows(), m.cols()) + " but declared " + shape(rows, cols));
      return std::nullopt;
    }
    return m;
  }

  Mat matrix(const json* obj, const std::string& path, const std::string& key, int rows, int cols) {
    const json* v = obj ? find(*obj, key) : nullptr;
    if (!v) return Mat::Zero(rows, cols);
    const auto m = matrix(*v, path + "." + key);
    if (!m) return Mat::Zero(rows, cols);
    if (m->rows() != rows || m->cols() != cols) {
      fail(path + "." + key, "is " + shape(m->rows(), m->cols()) + ", expected " + shape(rows, cols));
      return Mat::Zero(rows, cols);
    }
    return *m;
  }

  // A matrix, or {"breaks": [...], "pieces": [matrix, ...]} for piecewise-constant in time.
  MatrixCoefficient coefficient(const json* obj, const std::string& path, const std::string& key,
                                int rows, int cols) {
    const json* v = obj ? find(*obj, key) : nullptr;
    if (!v) return MatrixCoefficient::zero(rows, cols);
    const std::string p = path + "." + key;
    if (v->is_object() && v->contains("pieces")) {
      const auto breaks = numbers(*v, p, "breaks");
      const json& pieces = (*v)["pieces"];
      if (!pieces.is_array() || pieces.size() != breaks.size() || breaks.empty()) {
        fail(p, "needs equally long non-empty \"breaks\" and \"pieces\"");
        return MatrixCoefficient::zero(rows, cols);
      }
      std::vector<Mat> mats;
      for (std::size_t i = 0; i < pieces.size(); ++i) {
        const std::string pi = p + ".pieces[" + std::to_string(i) + "]";
        const auto m = matrix(pieces[i], pi);
        if (!m) return MatrixCoefficient::zero(rows, cols);
        if (m->rows() != rows || m->cols() != cols) {
          fail(pi, "is " + shape(m->rows(), m->cols()) + ", expected " + shape(rows, cols));
          return MatrixCoefficient::zero(rows, cols);
        }
        mats.push_back(*m);
      }
      return MatrixCoefficient(breaks, mats);
    }
    return MatrixCoefficient(matrix(obj, path, key, rows, cols));
  }

  PathFunction path_function(const json* obj, const std::string& path, const std::string& key,
                             int dim, double def) {
    PathFunction out(static_cast<std::size_t>(dim), TimeFunction(def));
    const json* v = obj ? find(*obj, key) : nullptr;
    if (!v) return out;
    const std::string p = path + "." + key;
    if (dim == 1 && !v->is_array()) {
      out[0] = time_function(*v, p);
      return out;
    }
    if (!v->is_array() || static_cast<int>(v->size()) != dim) {
      fail(p, "expected " + std::to_string(dim) + " components");
      return out;
    }
    for (int i = 0; i < dim; ++i)
      out[static_cast<std::size_t>(i)] = time_function((*v)[static_cast<std::size_t>(i)], p + "[" + std::to_string(i) + "]");
    return out;
  }
};

Dimensions read_dims(Reader& rd, const json* block, const std::string& path) {
  const json* d = block ? rd.find(*block, "dims") : nullptr;
  Dimensions dims;
  if (!d) {
    rd.fail(path + ".dims", "missing");
    return dims;
  }
  dims.n = static_cast<int>(rd.integer(d, path + ".dims", "n", 1, true));
  dims.m = static_cast<int>(rd.integer(d, path + ".dims", "m", 1, true));
  dims.k1 = static_cast<int>(rd.integer(d, path + ".dims", "k1", 1, true));
  dims.k2 = static_cast<int>(rd.integer(d, path + ".dims", "k2", 1, true));
  if (dims.n < 1 || dims.m < 1 || dims.k1 < 1 || dims.k2 < 1) {
    rd.fail(path + ".dims", "all dimensions must be at least 1");
    dims = {1, 1, 1, 1};
  }
  return dims;
}

LinearCoefficients read_system(Reader& rd, const json* block, const std::string& path,
                               const Dimensions& d) {
  const json* s = block ? rd.find(*block, "system") : nullptr;
  const std::string p = path + ".system";
  if (!s) rd.fail(p, "missing");
  LinearCoefficients c;
  c.A = rd.coefficient(s, p, "A", d.n, d.n);
  c.Abar = rd.coefficient(s, p, "Abar", d.n, d.n);
  c.B1 = rd.coefficient(s, p, "B1", d.n, d.k1);
  c.B2 = rd.coefficient(s, p, "B2", d.n, d.k2);
  c.b0 = rd.coefficient(s, p, "b0", d.n, 1);
  c.C = rd.coefficient(s, p, "C", d.n, d.n);
  c.Cbar = rd.coefficient(s, p, "Cbar", d.n, d.n);
  c.D1 = rd.coefficient(s, p, "D1", d.n, d.k1);
  c.D2 = rd.coefficient(s, p, "D2", d.n, d.k2);
  c.s0 = rd.coefficient(s, p, "s0", d.n, 1);
  c.Cw = rd.coefficient(s, p, "Cw", d.n, d.n);
  c.Cwbar = rd.coefficient(s, p, "Cwbar", d.n, d.n);
  c.Dw1 = rd.coefficient(s, p, "Dw1", d.n, d.k1);
  c.Dw2 = rd.coefficient(s, p, "Dw2", d.n, d.k2);
  c.sw0 = rd.coefficient(s, p, "sw0", d.n, 1);
  c.E = rd.coefficient(s, p, "E", d.m, d.n);
  c.F = rd.coefficient(s, p, "F", d.m, d.m);
  c.G = rd.coefficient(s, p, "G", d.m, d.m);
  c.Gbar = rd.coefficient(s, p, "Gbar", d.m, d.m);
  c.Fbar = rd.coefficient(s, p, "Fbar", d.m, d.m);
  c.H1 = rd.coefficient(s, p, "H1", d.m, d.k1);
  c.H2 = rd.coefficient(s, p, "H2", d.m, d.k2);
  c.f0 = rd.coefficient(s, p, "f0", d.m, 1);
  c.MT = rd.matrix(s, p, "MT", d.m, d.n);
  c.xi = rd.path_function(s, p, "xi", d.n, 0.0);
  c.phi = rd.path_function(s, p, "phi", d.m, 0.0);
  return c;
}

PlayerWeights read_weights(Reader& rd, const json* block, const std::string& path,
                           const Dimensions& d, int player) {
  const std::string key = "player" + std::to_string(player);
  const json* w = block ? rd.find(*block, key) : nullptr;
  const std::string p = path + "." + key;
  if (!w) rd.fail(p, "missing");
  const int kv = player == 1 ? d.k1 : d.k2;
  PlayerWeights out = PlayerWeights::zeros(d, player);
  out.O = rd.coefficient(w, p, "O", d.n, d.n);
  out.P = rd.coefficient(w, p, "P", d.m, d.m);
  out.Q = rd.coefficient(w, p, "Q", d.m, d.m);
  out.Qbar = rd.coefficient(w, p, "Qbar", d.m, d.m);
  out.R = rd.coefficient(w, p, "R", kv, kv);
  out.M = rd.matrix(w, p, "M", d.n, d.n);
  out.N = rd.matrix(w, p, "N", d.m, d.m);
  out.n_lin = rd.matrix(w, p, "n_lin", d.m, 1).col(0);
  out.l0 = rd.time_function(w, p, "l0", TimeFunction(0.0));
  return out;
}

}  // namespace

const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::General: return "general";
    case ModelKind::Lq: return "lq";
    case ModelKind::Pension: return "pension";
  }
  return "?";
}

namespace {

std::string join(const std::vector<std::string>& v) {
  std::string out = "invalid configuration:";
  for (const auto& s : v) out += "\n  - " + s;
  return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> violations)
    : std::invalid_argument(join(violations)), violations_(std::move(violations)) {}

ModelConfig parse_config(const json& doc) {
  Reader rd;
  ModelConfig cfg;
  cfg.source = doc;
  if (!doc.is_object()) throw ConfigError({"document: must be a JSON object"});

  const std::string kind = rd.text(&doc, "document", "kind", "", {"general", "lq", "pension"});
  if (!doc.contains("kind")) rd.fail("kind", "missing (general, lq or pension)");
  cfg.kind = kind == "general" ? ModelKind::General : kind == "lq" ? ModelKind::Lq : ModelKind::Pension;

  const json* grid = rd.section(doc, "grid", true);
  cfg.grid.T = rd.number(grid, "grid", "T", cfg.grid.T, true);
  cfg.grid.delta = rd.number(grid, "grid", "delta", cfg.grid.delta, true);
  cfg.grid.n_steps = static_cast<int>(rd.integer(grid, "grid", "n_steps", cfg.grid.n_steps, true));
  if (grid) {
    try {
      (void)cfg.time_grid();
    } catch (const std::invalid_argument& e) {
      rd.fail("grid", e.what());
    }
  }

  const json* sim = rd.section(doc, "simulation", false);
  cfg.simulation.m_paths = static_cast<int>(rd.integer(sim, "simulation", "m_paths", cfg.simulation.m_paths));
  cfg.simulation.master_seed = rd.seed(sim, "simulation", "master_seed", cfg.simulation.master_seed);
  // Affine conditional expectations are exact for the Gaussian LQ filter and keep the
  // Picard iteration stable; the nonlinear pension model uses quadratics.
  cfg.simulation.basis.degree = static_cast<int>(
      rd.integer(sim, "simulation", "basis_degree", cfg.kind == ModelKind::Pension ? 2 : 1));
  cfg.simulation.basis.ridge = rd.number(sim, "simulation", "ridge", cfg.simulation.basis.ridge);
  if (cfg.simulation.m_paths < 2) rd.fail("simulation.m_paths", "must be at least 2");
  if (cfg.simulation.basis.degree < 0 || cfg.simulation.basis.degree > 4)
    rd.fail("simulation.basis_degree", "must lie in 0..4");
  if (cfg.simulation.basis.ridge < 0.0) rd.fail("simulation.ridge", "must be non-negative");

  const json* sol = rd.section(doc, "solver", false);
  cfg.solver.damping = rd.number(sol, "solver", "damping", cfg.solver.damping);
  cfg.solver.tol = rd.number(sol, "solver", "tol", cfg.solver.tol);
  cfg.solver.max_iter = static_cast<int>(rd.integer(sol, "solver", "max_iter", cfg.solver.max_iter));
  if (!(cfg.solver.damping > 0.0 && cfg.solver.damping <= 1.0)) rd.fail("solver.damping", "must lie in (0, 1]");
  if (!(cfg.solver.tol > 0.0)) rd.fail("solver.tol", "must be positive");
  if (cfg.solver.max_iter < 1) rd.fail("solver.max_iter", "must be at least 1");

  const json* ver = rd.section(doc, "verification", false);
  if (ver && ver->contains("epsilons")) cfg.verification.epsilons = rd.numbers(*ver, "verification", "epsilons");
  for (double e : cfg.verification.epsilons)
    if (!(e >= 0.0)) rd.fail("verification.epsilons", "entries must be non-negative");
  if (ver && ver->contains("directions")) {
    const json& d = (*ver)["directions"];
    cfg.verification.directions.clear();
    if (!d.is_array()) rd.fail("verification.directions", "must be an array of names");
    else
      for (const auto& x : d) {
        const std::string name = x.is_string() ? x.get<std::string>() : "";
        if (name != "constant" && name != "sine" && name != "piecewise_random")
          rd.fail("verification.directions", "unknown direction " + x.dump() + " (constant, sine, piecewise_random)");
        else
          cfg.verification.directions.push_back(name);
      }
  }
  cfg.verification.se_multiplier = rd.number(ver, "verification", "se_multiplier", cfg.verification.se_multiplier);
  cfg.verification.negative_shift = rd.number(ver, "verification", "negative_shift", cfg.verification.negative_shift);
  cfg.verification.wbar_reseed = rd.seed(ver, "verification", "wbar_reseed", cfg.verification.wbar_reseed);
  if (!(cfg.verification.se_multiplier > 0.0)) rd.fail("verification.se_multiplier", "must be positive");

  if (cfg.kind == ModelKind::Pension) {
    const json* p = rd.section(doc, "pension", true);
    PensionSpec& s = cfg.pension;
    s.r = rd.time_function(p, "pension", "r", s.r);
    s.mu = rd.time_function(p, "pension", "mu", s.mu);
    s.sigma = rd.time_function(p, "pension", "sigma", s.sigma);
    s.sigma_bar = rd.time_function(p, "pension", "sigma_bar", s.sigma_bar);
    s.g = rd.time_function(p, "pension", "g", s.g);
    s.pi = rd.time_function(p, "pension", "pi", s.pi);
    s.alpha = rd.number(p, "pension", "alpha", s.alpha);
    s.beta = rd.number(p, "pension", "beta", s.beta);
    s.gamma = rd.number(p, "pension", "gamma", s.gamma);
    s.L1 = rd.number(p, "pension", "L1", s.L1);
    s.L2 = rd.number(p, "pension", "L2", s.L2);
    s.x0 = rd.number(p, "pension", "x0", s.x0);
    s.horizon = cfg.grid.T;
    s.delay = cfg.grid.delta;
    cfg.mode = rd.text(p, "pension", "mode", "derived", {"paper", "derived"}) == "paper"
                   ? DiscountMode::Paper
                   : DiscountMode::Derived;
    for (const auto& v : pension_violations(s)) rd.fail("pension", v);
  } else if (cfg.kind == ModelKind::Lq) {
    const json* b = rd.section(doc, "lq", true);
    LqModelSpec& s = cfg.lq;
    s.dims = read_dims(rd, b, "lq");
    s.sys = read_system(rd, b, "lq", s.dims);
    s.w1 = read_weights(rd, b, "lq", s.dims, 1);
    s.w2 = read_weights(rd, b, "lq", s.dims, 2);
    s.condition_cap = rd.number(b, "lq", "condition_cap", s.condition_cap);
    const std::string c = rd.text(b, "lq", "h4_case", "A", {"A", "B", "C"});
    cfg.h4_case = c == "A" ? H4Case::A : c == "B" ? H4Case::B : H4Case::C;
    for (const auto& v : lq_violations(s)) rd.fail("lq", v);
  } else {
    const json* b = rd.section(doc, "general", true);
    GeneralSpec& s = cfg.general;
    s.dims = read_dims(rd, b, "general");
    s.sys = read_system(rd, b, "general", s.dims);
    s.w1 = read_weights(rd, b, "general", s.dims, 1);
    s.w2 = read_weights(rd, b, "general", s.dims, 2);
    const json* u = b ? rd.find(*b, "controls") : nullptr;
    s.u1 = rd.matrix(u, "general.controls", "u1", s.dims.k1, 1).col(0);
    s.u2 = rd.matrix(u, "general.controls", "u2", s.dims.k2, 1).col(0);
  }

  if (!rd.errors.empty()) throw ConfigError(rd.errors);
  return cfg;
}

ModelConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({path + ": cannot open file"});
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t end = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError({path + ":" + std::to_string(line) + ":" + std::to_string(col) +
                       ": JSON parse error: " + e.what()});
  }
  return parse_config(doc);
}

void apply_overrides(ModelConfig& cfg, const Overrides& o) {
  std::vector<std::string> errors;
  if (o.paths) {
    if (*o.paths < 2) errors.push_back("--paths: must be at least 2");
    cfg.simulation.m_paths = *o.paths;
    cfg.source["simulation"]["m_paths"] = *o.paths;
  }
  if (o.steps) {
    cfg.grid.n_steps = *o.steps;
    cfg.source["grid"]["n_steps"] = *o.steps;
    try {
      (void)cfg.time_grid();
    } catch (const std::invalid_argument& e) {
      errors.push_back(std::string("--steps: ") + e.what());
    }
  }
  if (o.seed) {
    cfg.simulation.master_seed = *o.seed;
    cfg.source["simulation"]["master_seed"] = *o.seed;
  }
  if (o.mode) {
    cfg.mode = *o.mode;
    if (cfg.kind == ModelKind::Pension) cfg.source["pension"]["mode"] = to_string(*o.mode);
  }
  if (!errors.empty()) throw ConfigError(errors);
}

}  // namespace delaygame
