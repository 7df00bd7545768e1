#include "dimm/report.hpp"

#include "dimm/config.hpp"
#include "dimm/error.hpp"

#include <json.hpp>

#include <limits>
#include <sstream>

namespace dimm {

using json = nlohmann::ordered_json;

namespace {

json vec_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

VectorXd json_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json mat_json(const MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec_json(m.row(r).transpose()));
  return rows;
}

MatrixXd json_mat(const json& j) {
  const auto n = static_cast<Eigen::Index>(j.size());
  MatrixXd m(n, n == 0 ? 0 : static_cast<Eigen::Index>(j[0].size()));
  for (Eigen::Index r = 0; r < n; ++r) m.row(r) = json_vec(j[static_cast<std::size_t>(r)]).transpose();
  return m;
}

bool same(const VectorXd& a, const VectorXd& b) { return a.size() == b.size() && a == b; }
bool same(const MatrixXd& a, const MatrixXd& b) { return a.rows() == b.rows() && a.cols() == b.cols() && a == b; }

bool same(const BlockResult& a, const BlockResult& b) {
  return a.name == b.name && a.structure == b.structure && a.size == b.size && same(a.beta_hat, b.beta_hat) &&
         a.sigma == b.sigma && a.rho == b.rho && a.logcl == b.logcl && a.converged == b.converged &&
         a.simplex_iterations == b.simplex_iterations && a.quasi_newton_iterations == b.quasi_newton_iterations &&
         a.gradient_norm == b.gradient_norm;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(std::numeric_limits<double>::max_digits10);
  os << v;
  return os.str();
}

}  // namespace

bool FitReport::same_numbers(const FitReport& o) const {
  if (blocks.size() != o.blocks.size()) return false;
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    if (!same(blocks[j], o.blocks[j])) return false;
  }
  return schema_version == o.schema_version && n_subjects == o.n_subjects &&
         coefficient_names == o.coefficient_names && blocks_used == o.blocks_used && coefficients == o.coefficients &&
         same(covariance, o.covariance) && q_stat == o.q_stat && gof_df == o.gof_df && gof_p_value == o.gof_p_value &&
         ridge_used == o.ridge_used && warnings == o.warnings;
}

FitReport make_fit_report(const std::vector<std::string>& coefficient_names, const std::vector<BlockData>& blocks,
                          const std::vector<BlockFit>& fits, const IntegratedFit& integrated) {
  FitReport r;
  r.schema_version = kSchemaVersion;
  r.n_subjects = fits.empty() ? 0 : fits.front().n_subjects();
  r.coefficient_names = coefficient_names;
  for (std::size_t j = 0; j < fits.size(); ++j) {
    const auto& f = fits[j];
    BlockResult b;
    b.name = f.name;
    b.structure = f.gamma_hat.structure;
    b.size = blocks.at(j).block_size();
    b.beta_hat = f.beta_hat;
    b.sigma = f.gamma_hat.sigma;
    b.rho = f.gamma_hat.rho;
    b.logcl = f.logcl_at_optimum;
    b.converged = f.trace.converged;
    b.simplex_iterations = f.trace.simplex_iterations;
    b.quasi_newton_iterations = f.trace.quasi_newton_iterations;
    b.gradient_norm = f.trace.gradient_norm;
    r.blocks.push_back(std::move(b));
  }
  r.blocks_used = integrated.blocks_used;
  for (std::size_t q = 0; q < integrated.wald.size(); ++q) {
    const auto& w = integrated.wald[q];
    r.coefficients.push_back({q < coefficient_names.size() ? coefficient_names[q] : "beta" + std::to_string(q),
                              w.estimate, w.std_error, w.ci_lower, w.ci_upper, w.z, w.p_value});
  }
  r.covariance = integrated.covariance;
  r.q_stat = integrated.q_stat;
  if (integrated.gof) {
    r.gof_df = integrated.gof->df;
    r.gof_p_value = integrated.gof->p_value;
  }
  r.ridge_used = integrated.ridge_used;
  if (integrated.warning) r.warnings.push_back(*integrated.warning);
  for (const auto& b : r.blocks) {
    if (!b.converged) r.warnings.push_back("block '" + b.name + "' did not meet the gradient tolerance");
  }
  return r;
}

std::string fit_report_to_json(const FitReport& r, bool include_timing) {
  json j;
  j["schema_version"] = r.schema_version;
  j["n_subjects"] = r.n_subjects;
  j["coefficient_names"] = r.coefficient_names;
  json blocks = json::array();
  for (const auto& b : r.blocks) {
    blocks.push_back({{"name", b.name},
                      {"structure", to_string(b.structure)},
                      {"size", b.size},
                      {"beta_hat", vec_json(b.beta_hat)},
                      {"sigma", b.sigma},
                      {"rho", b.rho},
                      {"logcl", b.logcl},
                      {"converged", b.converged},
                      {"simplex_iterations", b.simplex_iterations},
                      {"quasi_newton_iterations", b.quasi_newton_iterations},
                      {"gradient_norm", b.gradient_norm}});
  }
  j["blocks"] = blocks;
  json coefs = json::array();
  for (const auto& c : r.coefficients) {
    coefs.push_back({{"name", c.name},
                     {"estimate", c.estimate},
                     {"std_error", c.std_error},
                     {"ci_lower", c.ci_lower},
                     {"ci_upper", c.ci_upper},
                     {"z", c.z},
                     {"p_value", c.p_value}});
  }
  j["integrated"] = {{"blocks_used", r.blocks_used}, {"coefficients", coefs}, {"covariance", mat_json(r.covariance)}};
  json gof = {{"q_stat", r.q_stat}};
  gof["df"] = r.gof_df ? json(*r.gof_df) : json(nullptr);
  gof["p_value"] = r.gof_p_value ? json(*r.gof_p_value) : json(nullptr);
  j["gof"] = gof;
  j["ridge_used"] = r.ridge_used;
  j["warnings"] = r.warnings;
  if (include_timing) {
    j["timing"] = {{"block_cpu_seconds", r.timing.block_seconds},
                   {"integration_cpu_seconds", r.timing.integration_seconds}};
  }
  return j.dump(2) + "\n";
}

FitReport fit_report_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    FitReport r;
    r.schema_version = j.at("schema_version").get<int>();
    if (r.schema_version != kSchemaVersion) throw ConfigError("fit report has unsupported schema_version");
    r.n_subjects = j.at("n_subjects").get<std::size_t>();
    r.coefficient_names = j.at("coefficient_names").get<std::vector<std::string>>();
    for (const auto& b : j.at("blocks")) {
      BlockResult br;
      br.name = b.at("name").get<std::string>();
      br.structure = structure_from_string(b.at("structure").get<std::string>());
      br.size = b.at("size").get<std::size_t>();
      br.beta_hat = json_vec(b.at("beta_hat"));
      br.sigma = b.at("sigma").get<double>();
      br.rho = b.at("rho").get<double>();
      br.logcl = b.at("logcl").get<double>();
      br.converged = b.at("converged").get<bool>();
      br.simplex_iterations = b.at("simplex_iterations").get<int>();
      br.quasi_newton_iterations = b.at("quasi_newton_iterations").get<int>();
      br.gradient_norm = b.at("gradient_norm").get<double>();
      r.blocks.push_back(std::move(br));
    }
    const auto& integ = j.at("integrated");
    r.blocks_used = integ.at("blocks_used").get<std::vector<std::string>>();
    for (const auto& c : integ.at("coefficients")) {
      r.coefficients.push_back({c.at("name").get<std::string>(), c.at("estimate").get<double>(),
                                c.at("std_error").get<double>(), c.at("ci_lower").get<double>(),
                                c.at("ci_upper").get<double>(), c.at("z").get<double>(),
                                c.at("p_value").get<double>()});
    }
    r.covariance = json_mat(integ.at("covariance"));
    const auto& gof = j.at("gof");
    r.q_stat = gof.at("q_stat").get<double>();
    if (!gof.at("df").is_null()) r.gof_df = gof.at("df").get<std::size_t>();
    if (!gof.at("p_value").is_null()) r.gof_p_value = gof.at("p_value").get<double>();
    r.ridge_used = j.at("ridge_used").get<double>();
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    if (j.contains("timing")) {
      r.timing.block_seconds = j["timing"].at("block_cpu_seconds").get<std::vector<double>>();
      r.timing.integration_seconds = j["timing"].at("integration_cpu_seconds").get<double>();
    }
    return r;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed fit report: ") + e.what());
  }
}

std::string sim_report_to_json(const SimReport& r, bool include_timing) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["scenario"] = r.scenario;
  j["seed"] = r.seed;
  j["n_replicates"] = r.n_replicates;
  j["coefficient_names"] = r.coefficient_names;
  j["beta0"] = vec_json(r.beta0);
  j["between_block"] = mat_json(r.between_block);
  j["had_failures"] = r.had_failures;
  json methods = json::array();
  json timing = json::object();
  for (const auto& m : r.methods) {
    json mj;
    mj["method"] = to_string(m.method);
    mj["n_success"] = m.n_success;
    mj["n_failed"] = m.n_failed;
    json coefs = json::array();
    for (std::size_t q = 0; q < m.coefficients.size(); ++q) {
      const auto& c = m.coefficients[q];
      coefs.push_back({{"name", q < r.coefficient_names.size() ? r.coefficient_names[q] : std::to_string(q)},
                       {"rmse", c.rmse},
                       {"bias", c.bias},
                       {"ese", c.ese},
                       {"ase", c.ase},
                       {"coverage", c.coverage},
                       {"rejection_rate", c.rejection_rate}});
    }
    mj["coefficients"] = coefs;
    if (m.gof) {
      mj["gof"] = {{"df", m.gof->df},
                   {"mean_q", m.gof->mean_q},
                   {"variance_q", m.gof->variance_q},
                   {"rejection_rate", m.gof->rejection_rate},
                   {"probs", m.gof->probs},
                   {"empirical_quantiles", m.gof->empirical_quantiles},
                   {"chi2_quantiles", m.gof->theoretical_quantiles}};
    }
    methods.push_back(mj);
    timing[to_string(m.method)] = {{"cpu_seconds", m.cpu_seconds}};
  }
  j["methods"] = methods;
  json failures = json::array();
  for (const auto& rec : r.replicates) {
    if (!rec.ok) failures.push_back({{"rep", rec.rep}, {"method", to_string(rec.method)}, {"error", rec.failure}});
  }
  j["failures"] = failures;
  if (include_timing) j["timing"] = timing;
  return j.dump(2) + "\n";
}

std::string sim_replicates_csv(const SimReport& r) {
  std::ostringstream os;
  os << "rep,method,coefficient,truth,estimate,std_error,ok,q_stat\n";
  for (const auto& rec : r.replicates) {
    for (std::size_t q = 0; q < r.coefficient_names.size(); ++q) {
      const auto qi = static_cast<Eigen::Index>(q);
      os << rec.rep << ',' << to_string(rec.method) << ',' << r.coefficient_names[q] << ',' << fmt(r.beta0(qi)) << ',';
      if (rec.ok) {
        os << fmt(rec.estimate(qi)) << ',' << fmt(rec.std_error(qi)) << ",1,";
      } else {
        os << ",,0,";
      }
      if (rec.ok && rec.q_stat) os << fmt(*rec.q_stat);
      os << '\n';
    }
  }
  return os.str();
}

}  // namespace dimm
