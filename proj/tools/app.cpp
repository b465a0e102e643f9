#include "app.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "npv/pctl.hpp"

namespace npv::app {

using nlohmann::json;
namespace fs = std::filesystem;

std::size_t SystemSetup::action_index(const std::string& name) const {
  for (std::size_t a = 0; a < actions.size(); ++a)
    if (actions[a] == name) return a;
  throw ValidationError("unknown action '" + name + "'");
}

// ---------------------------------------------------------------------------
// JSON access with field paths in every error
// ---------------------------------------------------------------------------

namespace {

class Node {
 public:
  Node(const json& j, std::string path) : j_(&j), path_(std::move(path)) {}

  const std::string& path() const { return path_; }
  const json& raw() const { return *j_; }

  [[noreturn]] void fail(const std::string& msg) const { throw ValidationError(path_ + ": " + msg); }

  bool has(const std::string& key) const { return j_->is_object() && j_->contains(key) && !(*j_)[key].is_null(); }

  Node at(const std::string& key) const {
    if (!j_->is_object()) fail("expected an object");
    if (!has(key)) throw ValidationError(sub(key) + ": required field is missing");
    return Node((*j_)[key], sub(key));
  }

  std::optional<Node> opt(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return Node((*j_)[key], sub(key));
  }

  void allow(std::initializer_list<const char*> keys) const {
    if (!j_->is_object()) fail("expected an object");
    for (const auto& [k, v] : j_->items()) {
      bool ok = false;
      for (const char* a : keys) ok = ok || k == a;
      if (!ok) throw ValidationError(sub(k) + ": unknown field");
    }
  }

  Node operator[](std::size_t i) const { return Node((*j_)[i], path_ + "[" + std::to_string(i) + "]"); }
  std::size_t size() const { return j_->size(); }
  bool is_array() const { return j_->is_array(); }

  double number() const {
    if (!j_->is_number()) fail("expected a number");
    const double v = j_->get<double>();
    if (!std::isfinite(v)) fail("expected a finite number");
    return v;
  }
  double positive() const {
    const double v = number();
    if (!(v > 0.0)) fail("must be positive");
    return v;
  }
  std::size_t count() const {
    if (!j_->is_number_integer() || j_->get<long long>() < 0) fail("expected a nonnegative integer");
    return j_->get<std::size_t>();
  }
  std::uint64_t u64() const {
    if (!j_->is_number_unsigned() && !(j_->is_number_integer() && j_->get<long long>() >= 0))
      fail("expected a nonnegative integer");
    return j_->get<std::uint64_t>();
  }
  bool boolean() const {
    if (!j_->is_boolean()) fail("expected true or false");
    return j_->get<bool>();
  }
  std::string str() const {
    if (!j_->is_string()) fail("expected a string");
    return j_->get<std::string>();
  }
  std::vector<double> numbers() const {
    if (j_->is_number()) return {number()};
    if (!j_->is_array() || j_->empty()) fail("expected a number or a nonempty array of numbers");
    std::vector<double> v;
    for (std::size_t i = 0; i < size(); ++i) v.push_back((*this)[i].number());
    return v;
  }
  std::vector<std::size_t> counts() const {
    if (!j_->is_array()) fail("expected an array of integers");
    std::vector<std::size_t> v;
    for (std::size_t i = 0; i < size(); ++i) v.push_back((*this)[i].count());
    return v;
  }
  Box box() const {
    allow({"lo", "hi"});
    const auto lo = at("lo").numbers(), hi = at("hi").numbers();
    if (lo.size() != hi.size()) fail("lo and hi differ in length");
    try {
      return Box(lo, hi);
    } catch (const ValidationError& e) {
      fail(e.what());
    }
  }

 private:
  std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  const json* j_;
  std::string path_;
};

template <class F>
auto with_path(const Node& n, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ValidationError& e) {
    n.fail(e.what());
  }
}

Eigen::MatrixXd matrix(const Node& n, std::size_t rows, std::size_t cols) {
  if (!n.is_array() || n.size() != rows) n.fail("expected " + std::to_string(rows) + " rows");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = n[r].numbers();
    if (row.size() != cols) n[r].fail("expected " + std::to_string(cols) + " columns");
    for (std::size_t c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
  }
  return m;
}

BuiltinSystem make_builtin(const Node& sys) {
  const std::string name = sys.at("builtin").str();
  const json empty = json::object();
  const Node params = sys.has("params") ? sys.at("params") : Node(empty, "system.params");
  auto num = [&](const char* key, double def) { return params.has(key) ? params.at(key).number() : def; };

  if (name == "case_study_linear") {
    params.allow({});
    return systems::case_study_linear();
  }
  if (name == "case_study_switched") {
    params.allow({});
    return systems::case_study_switched();
  }
  if (name == "univariate_linear") {
    params.allow({"a", "sigma"});
    return with_path(params, [&] { return systems::univariate_linear(num("a", 0.5), num("sigma", 1.0)); });
  }
  if (name == "univariate_mixture") {
    params.allow({"a", "mu1", "mu2", "sigma1", "sigma2", "p"});
    UnivariateMixtureParams p;
    p.a = num("a", p.a);
    p.mu1 = num("mu1", p.mu1);
    p.mu2 = num("mu2", p.mu2);
    p.sigma1 = num("sigma1", p.sigma1);
    p.sigma2 = num("sigma2", p.sigma2);
    p.p = num("p", p.p);
    return with_path(params, [&] { return systems::univariate_mixture(p); });
  }
  if (name == "bivariate_gaussian_case1" || name == "bivariate_gaussian_case2") {
    params.allow({});
    return systems::bivariate_gaussian(name.back() == '1' ? 1 : 2);
  }
  if (name == "car7d") {
    params.allow({"noise_scale", "sat1_bound", "sat2_bound", "v1", "v2"});
    CarParams p;
    p.noise_scale = num("noise_scale", p.noise_scale);
    p.sat1_bound = num("sat1_bound", p.sat1_bound);
    p.sat2_bound = num("sat2_bound", p.sat2_bound);
    p.v1 = num("v1", p.v1);
    p.v2 = num("v2", p.v2);
    return with_path(params, [&] { return systems::car7d(p); });
  }
  if (name == "linear_gaussian") {
    params.allow({"actions", "A", "mu", "sigma", "domain", "successor_domain"});
    const Node acts = params.at("actions");
    std::vector<std::string> names;
    for (std::size_t i = 0; i < acts.size(); ++i) names.push_back(acts[i].str());
    const Box dom = params.at("domain").box();
    const Box succ = params.has("successor_domain") ? params.at("successor_domain").box() : dom;
    const std::size_t d = dom.dim();
    LinearGaussianParams p;
    const Node a = params.at("A");
    if (!a.is_array() || a.size() != names.size()) a.fail("expected one matrix per action");
    for (std::size_t i = 0; i < a.size(); ++i) p.A.push_back(matrix(a[i], d, d));
    const auto mu = params.at("mu").numbers();
    if (mu.size() != d) params.at("mu").fail("wrong dimension");
    p.mu = Eigen::Map<const Eigen::VectorXd>(mu.data(), static_cast<Eigen::Index>(d));
    p.sigma = matrix(params.at("sigma"), d, d);
    return with_path(params, [&] {
      return BuiltinSystem(SystemKind::linear_gaussian, SystemSpec{d, names, dom, succ}, p);
    });
  }
  sys.at("builtin").fail("unknown builtin system '" + name + "'");
}

SystemSetup parse_system(const Node& root, const fs::path& base_dir) {
  const Node sys = root.at("system");
  sys.allow({"builtin", "params", "samples"});
  SystemSetup s;
  std::optional<Box> dom_override, succ_override;
  if (auto d = root.opt("domain")) {
    d->allow({"x", "y"});
    if (d->has("x")) dom_override = d->at("x").box();
    if (d->has("y")) succ_override = d->at("y").box();
  }
  if (sys.has("builtin") == sys.has("samples")) sys.fail("give exactly one of 'builtin' and 'samples'");

  if (sys.has("builtin")) {
    BuiltinSystem b = make_builtin(sys);
    if (dom_override || succ_override) {
      SystemSpec spec = b.spec();
      if (dom_override) spec.domain = *dom_override;
      if (succ_override) spec.successor_domain = *succ_override;
      if (spec.domain.dim() != spec.state_dim) root.at("domain").at("x").fail("dimension differs from the system");
      if (spec.successor_domain.dim() != spec.state_dim)
        root.at("domain").at("y").fail("dimension differs from the system");
      b = BuiltinSystem(b.kind(), spec, b.params());
    }
    s.actions = b.spec().actions;
    s.domain = b.spec().domain;
    s.successor_domain = b.spec().successor_domain;
    s.builtin = std::move(b);
    return s;
  }

  const Node files = sys.at("samples");
  if (!files.is_array() || files.size() == 0) files.fail("expected a nonempty array of sample file paths");
  for (std::size_t i = 0; i < files.size(); ++i) {
    fs::path p = files[i].str();
    if (p.is_relative()) p = base_dir / p;
    TransitionSamples t = with_path(files[i], [&] { return load_samples(p); });
    if (std::find(s.actions.begin(), s.actions.end(), t.action()) != s.actions.end())
      files[i].fail("duplicate action '" + t.action() + "'");
    if (!s.files.empty() && (t.x_dim() != s.files[0].x_dim() || t.y_dim() != s.files[0].y_dim()))
      files[i].fail("dimension differs from the first sample file");
    s.actions.push_back(t.action());
    s.files.push_back(std::move(t));
  }
  if (!dom_override) root.at("domain").at("x");  // throws: data-driven systems need a domain
  s.domain = *dom_override;
  s.successor_domain = succ_override;
  if (s.domain.dim() != s.files[0].x_dim()) root.at("domain").at("x").fail("dimension differs from the samples");
  for (std::size_t a = 0; a < s.files.size(); ++a)
    for (std::size_t i = 0; i < s.files[a].size(); ++i)
      if (!s.domain.contains(s.files[a].x(i), 1e-12))
        files[a].fail("sample " + std::to_string(i) + " has a state outside domain.x");
  return s;
}

LcSection parse_lc(const Node& n, const SystemSetup& sys) {
  n.allow({"n", "m", "grid_resolution", "bandwidth_policy", "h_x", "h_y", "constants", "eps3_variant", "refine",
           "underflow_floor", "action", "factors"});
  LcSection s;
  auto& c = s.config;
  if (auto v = n.opt("n")) c.n = v->count();
  if (auto v = n.opt("m")) c.m = v->count();
  if (auto v = n.opt("grid_resolution")) c.grid_resolution = v->count();
  if (auto v = n.opt("bandwidth_policy")) c.policy = with_path(*v, [&] { return bandwidth_policy_from_string(v->str()); });
  if (auto v = n.opt("h_x")) c.h_x = v->numbers();
  if (auto v = n.opt("h_y")) c.h_y = v->numbers();
  if (auto v = n.opt("eps3_variant")) c.variant = with_path(*v, [&] { return eps3_variant_from_string(v->str()); });
  if (auto v = n.opt("refine")) c.refine = v->boolean();
  if (auto v = n.opt("underflow_floor")) c.underflow_floor = v->number();

  const Node k = n.at("constants");
  k.allow({"c_f", "c_b1", "c_b2", "deriv_bound", "a_bound"});
  if (!k.has("c_f")) throw ValidationError(k.path() + ".c_f: required field is missing (smoothness constant C_f)");
  c.constants.c_f = k.at("c_f").positive();
  if (auto v = k.opt("c_b1")) c.constants.c_b1 = v->positive();
  if (auto v = k.opt("c_b2")) c.constants.c_b2 = v->positive();
  if (auto v = k.opt("deriv_bound")) c.constants.deriv_bound = v->positive();
  if (auto v = k.opt("a_bound")) c.constants.a_bound = v->positive();

  if (auto v = n.opt("action")) {
    s.action = v->str();
    with_path(*v, [&] { return sys.action_index(s.action); });
  }
  if (auto f = n.opt("factors")) {
    if (!f->is_array() || f->size() == 0) f->fail("expected a nonempty array");
    for (std::size_t i = 0; i < f->size(); ++i) {
      const Node e = (*f)[i];
      e.allow({"coord", "mask", "y_domain"});
      CompositionalFactor fac;
      fac.coord = e.at("coord").count();
      if (fac.coord >= sys.dim()) e.at("coord").fail("coordinate out of range");
      if (auto m = e.opt("mask")) fac.mask = m->counts();
      for (auto mk : fac.mask)
        if (mk >= sys.dim()) e.at("mask").fail("coordinate out of range");
      if (auto y = e.opt("y_domain")) {
        fac.y_domain = y->box();
        if (fac.y_domain->dim() != 1) y->fail("a factor successor domain is one-dimensional");
      }
      s.factors.push_back(std::move(fac));
    }
  }
  with_path(n, [&] {
    c.validate();
    return 0;
  });
  return s;
}

AbstractionSection parse_abstraction(const Node& n, const SystemSetup& sys) {
  n.allow({"method", "delta", "epsilon", "horizon", "leb", "lipschitz", "eps_bar", "beta_bar", "eps_g", "k",
           "row_budget", "total_budget", "x_grid", "n", "bandwidth_policy", "h_x", "h_y", "representative"});
  AbstractionSection s;
  s.method = n.at("method").str();
  if (s.method != "empirical" && s.method != "npe" && s.method != "model_based")
    n.at("method").fail("expected empirical, npe or model_based");

  const bool by_delta = n.has("delta"), by_eps = n.has("epsilon") || n.has("horizon") || n.has("leb");
  if (by_delta == by_eps) n.fail("give exactly one of 'delta' and ('epsilon', 'horizon', optional 'leb')");
  if (by_delta) {
    s.delta = n.at("delta").numbers();
    for (double d : *s.delta)
      if (!(d > 0.0)) n.at("delta").fail("must be positive");
    if (s.delta->size() != 1 && s.delta->size() != sys.dim()) n.at("delta").fail("wrong dimension");
  } else {
    s.epsilon = n.at("epsilon").positive();
    s.horizon = n.at("horizon").positive();
    if (auto v = n.opt("leb")) s.leb = v->positive();
  }
  if (auto v = n.opt("lipschitz")) s.lipschitz = v->positive();

  if (auto v = n.opt("beta_bar")) s.empirical.beta_bar = v->number();
  if (n.has("eps_bar") && n.has("eps_g")) n.fail("give at most one of 'eps_bar' and 'eps_g'");
  if (auto v = n.opt("eps_bar")) {
    s.empirical.eps_bar = v->number();
    s.eps_bar_given = true;
  }
  if (auto v = n.opt("eps_g")) s.eps_g = v->number();
  if (auto v = n.opt("k")) s.eps_g_horizon = v->count();
  if (auto v = n.opt("row_budget")) s.empirical.row_budget = v->count();
  if (auto v = n.opt("total_budget")) s.empirical.total_budget = v->count();
  if (s.method == "empirical") {
    if (!s.eps_bar_given && !s.eps_g) n.fail("empirical method needs 'eps_bar' or 'eps_g'");
    if (!(s.empirical.beta_bar > 0.0 && s.empirical.beta_bar < 1.0)) n.at("beta_bar").fail("must lie in (0, 1)");
    if (s.eps_bar_given && !(s.empirical.eps_bar > 0.0 && s.empirical.eps_bar <= 1.0))
      n.at("eps_bar").fail("must lie in (0, 1]");
    if (s.eps_g && !(*s.eps_g > 0.0 && *s.eps_g < 1.0)) n.at("eps_g").fail("must lie in (0, 1)");
  }

  if (auto v = n.opt("x_grid")) s.npe.x_grid = v->count();
  if (s.npe.x_grid < 1) n.at("x_grid").fail("must be at least 1");
  if (auto v = n.opt("n")) s.npe_samples = v->count();
  if (s.npe_samples < 2) n.at("n").fail("need at least 2 samples");
  if (auto v = n.opt("bandwidth_policy"))
    s.npe_policy = with_path(*v, [&] { return bandwidth_policy_from_string(v->str()); });
  if (auto v = n.opt("h_x")) s.npe_h_x = v->numbers();
  if (auto v = n.opt("h_y")) s.npe_h_y = v->numbers();
  if (s.npe_policy == BandwidthPolicy::explicit_values && (s.npe_h_x.empty() || s.npe_h_y.empty()))
    n.fail("explicit bandwidth policy needs h_x and h_y");
  if (auto v = n.opt("representative")) {
    s.representative = v->numbers();
    if (s.representative->size() != sys.dim()) v->fail("wrong dimension");
  }

  if ((s.method == "model_based" || s.method == "empirical") && !sys.builtin)
    n.at("method").fail("'" + s.method + "' needs a builtin system; data-driven systems support 'npe' only");
  return s;
}

SpecSection parse_spec(const Node& n, const SystemSetup& sys) {
  n.allow({"formula", "labels", "mode", "tol", "max_iters", "imdp"});
  SpecSection s;
  if (auto v = n.opt("formula")) s.formula = v->str();
  if (auto l = n.opt("labels")) {
    if (!l->raw().is_object()) l->fail("expected an object mapping propositions to boxes");
    for (const auto& [name, boxes] : l->raw().items()) {
      const Node b(boxes, l->path() + "." + name);
      if (!b.is_array()) b.fail("expected an array of boxes");
      auto& out = s.labels[name];
      for (std::size_t i = 0; i < b.size(); ++i) {
        out.push_back(b[i].box());
        if (out.back().dim() != sys.dim()) b[i].fail("wrong dimension");
      }
    }
  }
  if (auto v = n.opt("mode")) s.mode = with_path(*v, [&] { return synthesis_mode_from_string(v->str()); });
  if (auto v = n.opt("tol")) s.tol = v->positive();
  if (auto v = n.opt("max_iters")) s.max_iters = v->count();
  if (auto v = n.opt("imdp")) s.imdp = v->str();

  if (!s.formula.empty()) {
    const auto q = with_path(n.at("formula"), [&] { return parse_query(s.formula); });
    std::vector<std::string> used;
    q.path.left.collect_propositions(used);
    q.path.right.collect_propositions(used);
    // An explicit IMDP file declares its own propositions; checked at verification time.
    if (!s.labels.empty() || !s.imdp)
      for (const auto& p : used)
        if (p != kOutLabel && !s.labels.count(p))
          n.at("formula").fail("proposition '" + p + "' is not declared in spec.labels");
  }
  return s;
}

}  // namespace

RunConfig parse_config(const json& doc, const fs::path& base_dir) {
  const Node root(doc, "");
  if (!doc.is_object()) throw ValidationError("config: expected a JSON object");
  root.allow({"seed", "threads", "system", "domain", "lc", "abstraction", "spec", "output"});
  RunConfig cfg;
  cfg.raw = doc;
  cfg.base_dir = base_dir;
  if (auto v = root.opt("seed")) cfg.seed = v->u64();
  if (auto v = root.opt("threads")) cfg.threads = static_cast<unsigned>(v->count());
  cfg.system = parse_system(root, base_dir);
  if (auto v = root.opt("lc")) cfg.lc = parse_lc(*v, cfg.system);
  if (auto v = root.opt("abstraction")) cfg.abstraction = parse_abstraction(*v, cfg.system);
  if (auto v = root.opt("spec")) cfg.spec = parse_spec(*v, cfg.system);
  if (auto o = root.opt("output")) {
    o->allow({"dir", "formats"});
    if (auto d = o->opt("dir")) cfg.out_dir = d->str();
    if (auto f = o->opt("formats")) {
      if (!f->is_array()) f->fail("expected an array");
      for (std::size_t i = 0; i < f->size(); ++i) {
        const auto s = (*f)[i].str();
        if (s == "csv") cfg.csv = true;
        else if (s != "json") (*f)[i].fail("unknown format '" + s + "' (json, csv)");
      }
    }
  }
  cfg.raw["seed"] = cfg.seed;
  cfg.raw.erase("threads");
  return cfg;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open config '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ValidationError("config '" + path.string() + "': " + e.what());
  }
  return parse_config(doc, path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

// ---------------------------------------------------------------------------
// Pipeline steps
// ---------------------------------------------------------------------------

double union_volume(const std::vector<Box>& boxes, const Box& domain) {
  const std::size_t d = domain.dim();
  std::vector<Box> clipped;
  for (const auto& b : boxes) {
    if (b.dim() != d) throw ValidationError("union_volume: dimension mismatch");
    std::vector<double> lo(d), hi(d);
    bool empty = false;
    for (std::size_t k = 0; k < d; ++k) {
      lo[k] = std::max(b.lo(k), domain.lo(k));
      hi[k] = std::min(b.hi(k), domain.hi(k));
      empty = empty || !(lo[k] < hi[k]);
    }
    if (!empty) clipped.emplace_back(lo, hi);
  }
  if (clipped.empty()) return 0.0;
  // Coordinate compression: sum the elementary boxes covered by any input box.
  std::vector<std::vector<double>> cuts(d);
  for (std::size_t k = 0; k < d; ++k) {
    for (const auto& b : clipped) {
      cuts[k].push_back(b.lo(k));
      cuts[k].push_back(b.hi(k));
    }
    std::sort(cuts[k].begin(), cuts[k].end());
    cuts[k].erase(std::unique(cuts[k].begin(), cuts[k].end()), cuts[k].end());
  }
  std::vector<std::size_t> idx(d, 0);
  double total = 0.0;
  while (true) {
    bool covered = false;
    double vol = 1.0;
    for (std::size_t k = 0; k < d; ++k) vol *= cuts[k][idx[k] + 1] - cuts[k][idx[k]];
    for (const auto& b : clipped) {
      bool in = true;
      for (std::size_t k = 0; k < d && in; ++k) in = b.lo(k) <= cuts[k][idx[k]] && cuts[k][idx[k] + 1] <= b.hi(k);
      if (in) {
        covered = true;
        break;
      }
    }
    if (covered) total += vol;
    std::size_t k = 0;
    while (k < d && ++idx[k] + 1 >= cuts[k].size()) idx[k++] = 0;
    if (k == d) break;
  }
  return total;
}

namespace {

std::size_t lc_action(const RunConfig& cfg) {
  return cfg.lc->action.empty() ? 0 : cfg.system.action_index(cfg.lc->action);
}

std::vector<TransitionSamples> file_batches(const TransitionSamples& s, std::size_t m) {
  const std::size_t per = s.size() / m;
  if (per < 2)
    throw ValidationError("lc: sample file for action '" + s.action() + "' has " + std::to_string(s.size()) +
                          " rows, too few for m = " + std::to_string(m) + " iterations");
  std::vector<TransitionSamples> out;
  for (std::size_t mu = 0; mu < m; ++mu) out.push_back(s.slice(mu * per, per));
  return out;
}

KernelSpec npe_bandwidths(const AbstractionSection& a, const TransitionSamples& s) {
  KernelSpec k;
  const std::size_t d = s.x_dim();
  switch (a.npe_policy) {
    case BandwidthPolicy::scott:
      k.h_x = scott_bandwidth(s.xs(), d);
      k.h_y = scott_bandwidth(s.ys(), s.y_dim());
      break;
    case BandwidthPolicy::theoretical:
      k.h_x.assign(d, theoretical_bandwidth(s.size(), d, s.y_dim()));
      k.h_y.assign(s.y_dim(), k.h_x[0]);
      break;
    case BandwidthPolicy::explicit_values:
      k.h_x = a.npe_h_x.size() == 1 ? std::vector<double>(d, a.npe_h_x[0]) : a.npe_h_x;
      k.h_y = a.npe_h_y.size() == 1 ? std::vector<double>(s.y_dim(), a.npe_h_y[0]) : a.npe_h_y;
      if (k.h_x.size() != d || k.h_y.size() != s.y_dim())
        throw ValidationError("abstraction.h_x/h_y: wrong number of bandwidths");
      break;
  }
  return k;
}

std::map<std::string, std::vector<Box>> labels_of(const RunConfig& cfg) {
  return cfg.spec ? cfg.spec->labels : std::map<std::string, std::vector<Box>>{};
}

}  // namespace

std::vector<LipschitzReport> run_estimate_lc(const RunConfig& cfg) {
  if (!cfg.lc) throw ValidationError("lc: required section is missing");
  LcConfig c = cfg.lc->config;
  c.threads = cfg.threads;
  const auto& sys = cfg.system;
  const std::size_t a = lc_action(cfg);
  if (sys.builtin) {
    if (!cfg.lc->factors.empty())
      return compositional_lc(*sys.builtin, a, sys.domain, cfg.lc->factors, c, cfg.seed);
    ActionSampler sampler(*sys.builtin, a);
    return {estimate_lc(sampler, sys.domain, sys.successor_domain, c, cfg.seed)};
  }
  if (!cfg.lc->factors.empty()) throw ValidationError("lc.factors: compositional estimation needs a builtin system");
  const auto batches = file_batches(sys.files[a], c.m);
  return {estimate_lc(batches, sys.domain, sys.successor_domain, c)};
}

std::vector<double> resolve_delta(const RunConfig& cfg, std::optional<double> lipschitz, std::ostream* log) {
  if (!cfg.abstraction) throw ValidationError("abstraction: required section is missing");
  const auto& a = *cfg.abstraction;
  const Box& dom = cfg.system.domain;
  if (a.delta) return a.delta->size() == 1 ? std::vector<double>(dom.dim(), a.delta->front()) : *a.delta;

  if (!lipschitz) throw ValidationError("abstraction.lipschitz: needed to size the partition from epsilon");
  double leb = 0.0;
  if (a.leb) {
    leb = *a.leb;
  } else {
    std::vector<Box> all;
    for (const auto& [name, boxes] : labels_of(cfg)) all.insert(all.end(), boxes.begin(), boxes.end());
    leb = union_volume(all, dom);
    if (!(leb > 0.0)) throw ValidationError("abstraction.leb: no labeled region to measure; give 'leb' explicitly");
  }
  const double raw = partition_size(*a.epsilon, *a.horizon, *lipschitz, leb);
  std::vector<double> delta(dom.dim());
  for (std::size_t k = 0; k < dom.dim(); ++k) {
    const double cells = std::ceil(dom.width(k) / raw * (1.0 - 1e-12));
    if (!(cells <= 1e7)) throw BudgetError("partition: delta = " + format_double(raw) + " gives too many cells");
    delta[k] = dom.width(k) / std::max(1.0, cells);
  }
  if (log)
    *log << "partition size: epsilon / (T L leb) = " << format_double(*a.epsilon) << " / (" << format_double(*a.horizon)
         << " * " << format_double(*lipschitz) << " * " << format_double(leb) << ") = " << format_double(raw)
         << ", rounded to " << format_double(delta[0]) << "\n";
  return delta;
}

GridPartition make_partition(const RunConfig& cfg, const std::vector<double>& delta) {
  GridPartition p(cfg.system.domain, delta, labels_of(cfg));
  if (cfg.abstraction && cfg.abstraction->representative) p.set_representative_offset(*cfg.abstraction->representative);
  return p;
}

Imdp run_build_imdp(const RunConfig& cfg, std::ostream* log) {
  if (!cfg.abstraction) throw ValidationError("abstraction: required section is missing");
  const auto& a = *cfg.abstraction;
  const auto& sys = cfg.system;

  std::optional<double> L = a.lipschitz;
  if (!a.delta && !L) {
    if (!cfg.lc) throw ValidationError("abstraction.lipschitz: missing, and no lc section to estimate it from");
    double hi = 0.0;
    for (const auto& r : run_estimate_lc(cfg)) hi = std::max(hi, r.interval_hi);
    if (!(hi > 0.0)) throw NumericalError("estimated Lipschitz bound is zero; cannot size the partition");
    if (log) *log << "Lipschitz upper bound from estimation: " << format_double(hi) << "\n";
    L = hi;
  }
  const auto delta = resolve_delta(cfg, L, log);
  const GridPartition part = make_partition(cfg, delta);

  Imdp m;
  if (a.method == "model_based") {
    m = model_based_mdp(*sys.builtin, part, cfg.threads);
  } else if (a.method == "empirical") {
    EmpiricalConfig e = a.empirical;
    e.threads = cfg.threads;
    if (a.eps_g) {
      std::size_t k = 0;
      if (a.eps_g_horizon) {
        k = *a.eps_g_horizon;
      } else if (cfg.spec && !cfg.spec->formula.empty()) {
        const auto q = parse_query(cfg.spec->formula);
        if (q.path.kind != PathFormula::Kind::bounded_until)
          throw ValidationError("abstraction.k: needed with eps_g unless the formula is bounded");
        k = q.path.bound;
      } else {
        throw ValidationError("abstraction.k: needed with eps_g");
      }
      if (k == 0) throw ValidationError("abstraction.k: eps_g needs a horizon of at least 1");
      e.eps_bar = eps_bar_from_global(*a.eps_g, k, part.num_cells());
    }
    m = empirical_imdp(*sys.builtin, part, e, derive_seed(cfg.seed, {1}));
  } else {
    std::vector<CondDensityEstimator> ests;
    for (std::size_t act = 0; act < sys.actions.size(); ++act) {
      TransitionSamples s = sys.builtin
                                ? generate_samples(*sys.builtin, act, sys.domain, a.npe_samples,
                                                   derive_seed(cfg.seed, {2, act}))
                                : sys.files[act];
      KernelSpec k = npe_bandwidths(a, s);
      ests.emplace_back(std::move(s), std::move(k));
    }
    NpeConfig nc = a.npe;
    nc.threads = cfg.threads;
    m = npe_imdp(ests, sys.actions, part, nc);
  }
  m.provenance["seed"] = cfg.seed;
  m.provenance["delta"] = delta;
  return m;
}

VerificationResult run_verify(const RunConfig& cfg, const Imdp& imdp) {
  if (!cfg.spec || cfg.spec->formula.empty()) throw ValidationError("spec.formula: required field is missing");
  const auto q = parse_query(cfg.spec->formula);
  VerifyOptions opt;
  opt.mode = cfg.spec->mode;
  opt.tol = cfg.spec->tol;
  opt.max_iters = cfg.spec->max_iters;
  opt.threads = cfg.threads == 0 ? default_threads() : cfg.threads;
  return check_path(imdp, q.path, opt);
}

// ---------------------------------------------------------------------------
// Commands with file output
// ---------------------------------------------------------------------------

namespace {

json manifest(const RunConfig& cfg, const std::string& command) {
  return {{"tool", "npv"}, {"version", "0.1.0"}, {"command", command}, {"config", cfg.raw}};
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw Error("cannot open '" + p.string() + "' for writing");
  os << text;
  if (!os) throw Error("write to '" + p.string() + "' failed");
}

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

void prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory '" + dir.string() + "': " + ec.message());
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << v;
  return os.str();
}

std::string heatmap_csv(const VerificationResult& r, const Imdp& imdp) {
  std::ostringstream os;
  const auto& g = *imdp.grid;
  const std::size_t d = g.domain.dim();
  for (std::size_t k = 0; k < d; ++k) os << "x" << k << "_lo,x" << k << "_hi,";
  os << "p_lo,p_up\n";
  std::size_t cells = 1;
  for (auto c : g.counts) cells *= c;
  for (std::size_t c = 0; c < cells; ++c) {
    std::size_t rest = c;
    for (std::size_t k = 0; k < d; ++k) {
      const std::size_t i = rest % g.counts[k];
      rest /= g.counts[k];
      const double w = g.domain.width(k) / static_cast<double>(g.counts[k]);
      os << format_double(g.domain.lo(k) + static_cast<double>(i) * w) << ','
         << format_double(i + 1 == g.counts[k] ? g.domain.hi(k) : g.domain.lo(k) + static_cast<double>(i + 1) * w)
         << ',';
    }
    os << format_double(r.p_lo[c]) << ',' << format_double(r.p_up[c]) << '\n';
  }
  return os.str();
}

}  // namespace

double mean_width(const VerificationResult& r, const Imdp& imdp) {
  double width = 0.0;
  std::size_t cells = 0;
  for (std::size_t i = 0; i < imdp.num_states; ++i) {
    if (imdp.sink && *imdp.sink == i) continue;
    width += r.p_up[i] - r.p_lo[i];
    ++cells;
  }
  return cells ? width / static_cast<double>(cells) : 0.0;
}

std::vector<LipschitzReport> cmd_estimate_lc(const RunConfig& cfg, std::ostream& log) {
  const auto reports = run_estimate_lc(cfg);
  prepare_dir(cfg.out_dir);
  json out = {{"manifest", manifest(cfg, "estimate-lc")}};
  json arr = json::array();
  for (const auto& r : reports) arr.push_back(to_json(r));
  out["reports"] = arr;

  std::ostringstream s;
  double worst_hi = 0.0;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    if (reports.size() > 1) s << "factor " << cfg.lc->factors[i].coord << ": ";
    s << "L_hat = " << format_double(r.overall) << "  interval [" << format_double(r.interval_lo) << ", "
      << format_double(r.interval_hi) << "]  (n = " << r.n << ", m = " << r.m << ", h_x = " << format_double(r.h_x[0])
      << ")\n";
    worst_hi = std::max(worst_hi, r.interval_hi);
  }
  if (cfg.abstraction && cfg.abstraction->epsilon && worst_hi > 0.0) {
    const auto delta = resolve_delta(cfg, worst_hi);
    s << "suggested delta (upper interval end as L): " << format_double(delta[0]) << "\n";
    out["suggested_delta"] = delta;
  }
  write_json(cfg.out_dir / "lc_report.json", out);
  write_text(cfg.out_dir / "lc_summary.txt", s.str());
  log << s.str();
  return reports;
}

void cmd_build_imdp(const RunConfig& cfg, std::ostream& log) {
  std::ostringstream s;
  const Imdp m = run_build_imdp(cfg, &s);
  log << s.str();
  write_build_outputs(cfg, m, log);
}

void write_build_outputs(const RunConfig& cfg, const Imdp& m, std::ostream& log) {
  std::ostringstream s;
  prepare_dir(cfg.out_dir);
  write_imdp(m, cfg.out_dir / "abstraction.imdp");
  const GridPartition part = make_partition(cfg, m.provenance["delta"].get<std::vector<double>>());
  json man = manifest(cfg, "build-imdp");
  man["method"] = cfg.abstraction->method;
  man["provenance"] = m.provenance;
  man["cells"] = part.num_cells();
  man["states"] = m.num_states;
  man["warnings"] = part.warnings();
  write_json(cfg.out_dir / "build_manifest.json", man);
  s << "built " << cfg.abstraction->method << " abstraction: " << part.num_cells() << " cells + sink, "
    << m.num_actions() << " action(s)\n";
  for (const auto& w : part.warnings()) s << "warning: " << w << "\n";
  log << s.str();
}

void cmd_verify(const RunConfig& cfg, std::ostream& log) {
  fs::path path = cfg.out_dir / "abstraction.imdp";
  if (cfg.spec && cfg.spec->imdp) path = cfg.spec->imdp->is_relative() ? cfg.base_dir / *cfg.spec->imdp : *cfg.spec->imdp;
  const Imdp m = read_imdp(path);
  const auto r = run_verify(cfg, m);
  write_verify_outputs(cfg, m, r, path.string(), log);
}

void write_verify_outputs(const RunConfig& cfg, const Imdp& m, const VerificationResult& r, const std::string& source,
                          std::ostream& log) {
  const auto q = parse_query(cfg.spec->formula);
  prepare_dir(cfg.out_dir);

  json res = to_json(r, m);
  res["manifest"] = manifest(cfg, "verify");
  res["imdp"] = source;
  std::ostringstream s;
  s << "formula: " << q.to_string() << "  (mode " << to_string(r.mode) << ")\n";
  if (!r.converged) s << "warning: no convergence after " << r.horizon << " sweeps, residual " << r.residual << "\n";
  if (q.threshold) {
    const auto verdicts = check_threshold(r, *q.threshold);
    std::size_t yes = 0, no = 0, unk = 0;
    json v = json::array();
    for (auto x : verdicts) {
      yes += x == Verdict::yes;
      no += x == Verdict::no;
      unk += x == Verdict::unknown;
      v.push_back(to_string(x));
    }
    res["verdicts"] = v;
    res["verdict_counts"] = {{"yes", yes}, {"no", no}, {"unknown", unk}};
    s << "verdicts: yes " << yes << ", no " << no << ", unknown " << unk << "\n";
  }
  s << "mean interval width: " << fmt(mean_width(r, m), 6) << "\n";
  write_json(cfg.out_dir / "verify_result.json", res);
  if (m.grid) {
    write_json(cfg.out_dir / "heatmap.json", heatmap_json(r, m));
    if (cfg.csv) write_text(cfg.out_dir / "heatmap.csv", heatmap_csv(r, m));
    if (m.num_actions() > 1 && !r.strategy_lo.empty())
      write_json(cfg.out_dir / "strategy_map.json", strategy_map_json(r, m));
  }
  write_text(cfg.out_dir / "verify_summary.txt", s.str());
  log << s.str();
}

}  // namespace npv::app
