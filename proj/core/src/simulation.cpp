#include "dimm/simulation.hpp"

#include "dimm/baselines.hpp"
#include "dimm/cpu_time.hpp"
#include "dimm/distributions.hpp"
#include "dimm/error.hpp"
#include "dimm/gmm.hpp"
#include "dimm/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace dimm {

namespace {

std::mt19937_64 replicate_rng(std::uint64_t seed, std::size_t rep) {
  const auto r = static_cast<std::uint64_t>(rep);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(r >> 32), 0x44494d4du};
  return std::mt19937_64(seq);
}

// Sample quantile with linear interpolation between order statistics.
double quantile_sorted(const std::vector<double>& sorted, double prob) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double h = prob * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

bool CovariateRecipe::row_varying() const {
  return kind == Kind::MvNormalRows || kind == Kind::Alternating01;
}

std::string to_string(CovariateRecipe::Kind k) {
  using K = CovariateRecipe::Kind;
  switch (k) {
    case K::StandardNormal:
      return "standard_normal";
    case K::Bernoulli:
      return "bernoulli";
    case K::Categorical:
      return "categorical";
    case K::Uniform01:
      return "uniform01";
    case K::Interaction:
      return "interaction";
    case K::MvNormalRows:
      return "mv_normal_rows";
    case K::Alternating01:
      return "alternating01";
  }
  return "?";
}

CovariateRecipe::Kind covariate_kind_from_string(const std::string& name) {
  using K = CovariateRecipe::Kind;
  for (auto k : {K::StandardNormal, K::Bernoulli, K::Categorical, K::Uniform01, K::Interaction, K::MvNormalRows,
                 K::Alternating01}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown covariate generator '" + name + "'");
}

std::string to_string(SimMethod m) {
  switch (m) {
    case SimMethod::Dimm:
      return "DIMM";
    case SimMethod::DimmAR1:
      return "DIMM_AR1";
    case SimMethod::DimmCS:
      return "DIMM_CS";
    case SimMethod::GeeInd:
      return "GEE_IND";
    case SimMethod::GeeCS:
      return "GEE_CS";
    case SimMethod::GlsOracle:
      return "GLS_ORACLE";
  }
  return "?";
}

SimMethod sim_method_from_string(const std::string& name) {
  for (auto m : {SimMethod::Dimm, SimMethod::DimmAR1, SimMethod::DimmCS, SimMethod::GeeInd, SimMethod::GeeCS,
                 SimMethod::GlsOracle}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown method '" + name + "'");
}

MatrixXd SimScenario::between_block() const {
  if (between_recipe.explicit_matrix) return *between_recipe.explicit_matrix;
  return random_correlation_matrix(partition.n_blocks(), between_recipe.seed, between_recipe.scale,
                                   between_recipe.eigen_floor);
}

MatrixXd SimScenario::covariance() const {
  std::vector<std::size_t> sizes;
  for (const auto& b : partition.blocks()) sizes.push_back(b.size);
  return assemble_kronecker(between_block(), {within_block}, sizes);
}

std::vector<std::string> SimScenario::coefficient_names() const {
  std::vector<std::string> names;
  if (intercept) names.emplace_back("intercept");
  for (std::size_t k = 0; k < covariates.size(); ++k) names.push_back("x" + std::to_string(k + 1));
  return names;
}

void SimScenario::validate() const {
  auto fail = [&](const std::string& msg) { throw ScenarioError("scenario '" + name + "': " + msg); };
  if (n_subjects < 2) fail("n_subjects must be >= 2");
  if (n_replicates < 1) fail("replicates must be >= 1");
  if (static_cast<std::size_t>(beta0.size()) != n_params()) {
    std::ostringstream os;
    os << "beta0 has length " << beta0.size() << " but intercept + covariates gives p = " << n_params();
    fail(os.str());
  }
  if (n_params() == 0) fail("model has no covariates");
  if (!(within_block.sigma > 0.0) || !(std::abs(within_block.rho) < 1.0)) fail("within_block needs sigma > 0, |rho| < 1");
  if (methods.empty()) fail("no methods requested");
  for (std::size_t k = 0; k < covariates.size(); ++k) {
    const auto& c = covariates[k];
    const std::string where = "covariates[" + std::to_string(k) + "]";
    switch (c.kind) {
      case CovariateRecipe::Kind::Bernoulli:
        if (!(c.q >= 0.0 && c.q <= 1.0)) fail(where + ".q must lie in [0, 1]");
        break;
      case CovariateRecipe::Kind::Categorical: {
        if (c.probs.empty()) fail(where + ".probs is empty");
        double total = 0.0;
        for (double pr : c.probs) {
          if (!(pr >= 0.0)) fail(where + ".probs has a negative entry");
          total += pr;
        }
        if (std::abs(total - 1.0) > 1e-9) fail(where + ".probs must sum to 1");
        break;
      }
      case CovariateRecipe::Kind::Interaction:
        if (c.a >= k || c.b >= k) fail(where + " interaction operands must refer to earlier covariates");
        break;
      case CovariateRecipe::Kind::MvNormalRows:
        if (!(std::abs(c.rho) < 1.0)) fail(where + ".rho must satisfy |rho| < 1");
        break;
      default:
        break;
    }
  }
  for (const auto& s : subgroup) {
    try {
      (void)partition.index_of(s);
    } catch (const PartitionError&) {
      fail("subgroup block '" + s + "' is not in the partition");
    }
  }
  if (between_recipe.explicit_matrix) {
    const auto& s = *between_recipe.explicit_matrix;
    if (s.rows() != static_cast<Eigen::Index>(partition.n_blocks()) || s.cols() != s.rows()) {
      fail("between_block matrix must be J x J");
    }
  }
}

ReplicateGenerator::ReplicateGenerator(const SimScenario& scenario) : scn_(scenario) {
  scenario.validate();
  sigma_ = scenario.covariance();
  Eigen::LLT<MatrixXd> llt(sigma_);
  if (llt.info() != Eigen::Success) throw CovarianceError("scenario covariance is not positive definite");
  sigma_chol_ = llt.matrixL();
  const auto m = scenario.partition.total_size();
  for (const auto& c : scenario.covariates) {
    if (c.kind == CovariateRecipe::Kind::MvNormalRows) {
      row_chol_.emplace_back(Eigen::LLT<MatrixXd>(ar1_matrix({1.0, c.rho}, m, m)).matrixL());
    } else {
      row_chol_.emplace_back();
    }
  }
}

PanelDataset ReplicateGenerator::generate(std::size_t rep) const {
  const auto& scn = scn_;
  const auto n = static_cast<Eigen::Index>(scn.n_subjects);
  const auto m = static_cast<Eigen::Index>(scn.partition.total_size());
  const auto p = static_cast<Eigen::Index>(scn.n_params());
  const Eigen::Index first = scn.intercept ? 1 : 0;

  auto rng = replicate_rng(scn.seed, rep);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  MatrixXd x(n * m, p);
  MatrixXd y(n, m);
  VectorXd z(m);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto xi = x.middleRows(i * m, m);
    if (scn.intercept) xi.col(0).setOnes();
    for (std::size_t k = 0; k < scn.covariates.size(); ++k) {
      const auto& c = scn.covariates[k];
      auto col = xi.col(first + static_cast<Eigen::Index>(k));
      using K = CovariateRecipe::Kind;
      switch (c.kind) {
        case K::StandardNormal:
          col.setConstant(normal(rng));
          break;
        case K::Bernoulli:
          col.setConstant(unif(rng) < c.q ? 1.0 : 0.0);
          break;
        case K::Categorical: {
          const double u = unif(rng);
          double acc = 0.0;
          std::size_t level = c.probs.size();
          for (std::size_t l = 0; l < c.probs.size(); ++l) {
            acc += c.probs[l];
            if (u < acc) {
              level = l + 1;
              break;
            }
          }
          col.setConstant(static_cast<double>(level));
          break;
        }
        case K::Uniform01:
          col.setConstant(unif(rng));
          break;
        case K::Interaction:
          col = xi.col(first + static_cast<Eigen::Index>(c.a)).cwiseProduct(xi.col(first + static_cast<Eigen::Index>(c.b)));
          break;
        case K::MvNormalRows:
          for (Eigen::Index r = 0; r < m; ++r) z(r) = normal(rng);
          col = row_chol_[k] * z;
          break;
        case K::Alternating01:
          for (Eigen::Index r = 0; r < m; ++r) col(r) = static_cast<double>(r % 2);
          break;
      }
    }
    for (Eigen::Index r = 0; r < m; ++r) z(r) = normal(rng);
    y.row(i) = (xi * scn.beta0 + sigma_chol_ * z).transpose();
  }
  return PanelDataset(std::move(y), std::move(x));
}

PanelDataset generate_replicate(const SimScenario& scenario, std::size_t rep) {
  return ReplicateGenerator(scenario).generate(rep);
}

CoefficientMetrics coefficient_metrics(const std::vector<double>& estimates, const std::vector<double>& std_errors,
                                       double truth) {
  constexpr double kZ975 = 1.959963984540054;
  CoefficientMetrics out;
  const auto r = estimates.size();
  if (r == 0) return out;
  double sum_dev = 0.0;
  double sum_sq_dev = 0.0;
  double sum_se = 0.0;
  std::size_t covered = 0;
  std::size_t rejected = 0;
  for (std::size_t k = 0; k < r; ++k) {
    const double dev = estimates[k] - truth;
    sum_dev += dev;
    sum_sq_dev += dev * dev;
    sum_se += std_errors[k];
    if (std::abs(dev) <= kZ975 * std_errors[k]) ++covered;
    if (std::abs(estimates[k]) > kZ975 * std_errors[k]) ++rejected;
  }
  const double rd = static_cast<double>(r);
  out.bias = sum_dev / rd;
  out.rmse = std::sqrt(sum_sq_dev / rd);
  const double mean = std::accumulate(estimates.begin(), estimates.end(), 0.0) / rd;
  double ss = 0.0;
  for (double e : estimates) ss += (e - mean) * (e - mean);
  out.ese = r > 1 ? std::sqrt(ss / (rd - 1.0)) : 0.0;
  out.ase = sum_se / rd;
  out.coverage = static_cast<double>(covered) / rd;
  out.rejection_rate = static_cast<double>(rejected) / rd;
  return out;
}

SimReport run_scenario(const SimScenario& scn) {
  const ReplicateGenerator gen(scn);
  const auto n_methods = scn.methods.size();
  const auto p = scn.n_params();

  struct Slot {
    ReplicateRecord record;
    double cpu = 0.0;
  };
  std::vector<Slot> slots(scn.n_replicates * n_methods);

  parallel_for(scn.n_replicates, scn.workers, [&](std::size_t rep) {
    const auto data = gen.generate(rep);
    for (std::size_t k = 0; k < n_methods; ++k) {
      auto& slot = slots[rep * n_methods + k];
      auto& rec = slot.record;
      rec.rep = rep;
      rec.method = scn.methods[k];
      const double t0 = thread_cpu_seconds();
      try {
        switch (rec.method) {
          case SimMethod::Dimm:
          case SimMethod::DimmAR1:
          case SimMethod::DimmCS: {
            auto part = scn.partition;
            if (rec.method == SimMethod::DimmAR1) part = part.with_structure(Structure::AR1);
            if (rec.method == SimMethod::DimmCS) part = part.with_structure(Structure::CS);
            const auto blocks = partition_dataset(data, part);
            std::vector<Structure> structures;
            for (const auto& b : part.blocks()) structures.push_back(b.structure);
            const auto fits = fit_blocks(blocks, structures, scn.fit_options, 1);
            const auto integ = integrate(blocks, fits, scn.subgroup, 1);
            rec.estimate = integ.beta_dimm;
            rec.std_error = integ.covariance.diagonal().cwiseSqrt();
            rec.q_stat = integ.q_stat;
            break;
          }
          case SimMethod::GeeInd:
          case SimMethod::GeeCS: {
            const auto fit = gee_fit(data, rec.method == SimMethod::GeeInd ? WorkingCorrelation::Independence
                                                                            : WorkingCorrelation::Exchangeable);
            if (!fit.converged) throw FitError("GEE did not converge");
            rec.estimate = fit.beta_hat;
            rec.std_error = fit.covariance.diagonal().cwiseSqrt();
            break;
          }
          case SimMethod::GlsOracle: {
            const auto fit = gls_oracle(data, gen.covariance());
            rec.estimate = fit.beta_hat;
            rec.std_error = fit.covariance.diagonal().cwiseSqrt();
            break;
          }
        }
        rec.ok = rec.estimate.allFinite() && rec.std_error.allFinite();
        if (!rec.ok) rec.failure = "non-finite estimate or standard error";
      } catch (const Error& e) {
        rec.ok = false;
        rec.failure = e.what();
      }
      slot.cpu = thread_cpu_seconds() - t0;
    }
  });

  SimReport report;
  report.scenario = scn.name;
  report.seed = scn.seed;
  report.n_replicates = scn.n_replicates;
  report.coefficient_names = scn.coefficient_names();
  report.beta0 = scn.beta0;
  report.between_block = scn.between_block();

  std::size_t n_subgroup_blocks = scn.subgroup.empty() ? scn.partition.n_blocks() : scn.subgroup.size();
  for (std::size_t k = 0; k < n_methods; ++k) {
    MethodReport mr;
    mr.method = scn.methods[k];
    std::vector<std::vector<double>> est(p), se(p);
    std::vector<double> qs;
    for (std::size_t rep = 0; rep < scn.n_replicates; ++rep) {
      const auto& slot = slots[rep * n_methods + k];
      mr.cpu_seconds += slot.cpu;
      if (!slot.record.ok) {
        ++mr.n_failed;
        continue;
      }
      ++mr.n_success;
      for (std::size_t q = 0; q < p; ++q) {
        est[q].push_back(slot.record.estimate(static_cast<Eigen::Index>(q)));
        se[q].push_back(slot.record.std_error(static_cast<Eigen::Index>(q)));
      }
      if (slot.record.q_stat) qs.push_back(*slot.record.q_stat);
    }
    for (std::size_t q = 0; q < p; ++q) {
      mr.coefficients.push_back(coefficient_metrics(est[q], se[q], scn.beta0(static_cast<Eigen::Index>(q))));
    }
    if (!qs.empty() && n_subgroup_blocks >= 2) {
      GofSummary g;
      g.df = (n_subgroup_blocks - 1) * p;
      const double df = static_cast<double>(g.df);
      const double rd = static_cast<double>(qs.size());
      g.mean_q = std::accumulate(qs.begin(), qs.end(), 0.0) / rd;
      double ss = 0.0;
      for (double v : qs) ss += (v - g.mean_q) * (v - g.mean_q);
      g.variance_q = qs.size() > 1 ? ss / (rd - 1.0) : 0.0;
      const double crit = chi2_quantile(0.95, df);
      g.rejection_rate =
          static_cast<double>(std::count_if(qs.begin(), qs.end(), [&](double v) { return v > crit; })) / rd;
      std::sort(qs.begin(), qs.end());
      g.probs = {0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99};
      for (double pr : g.probs) {
        g.empirical_quantiles.push_back(quantile_sorted(qs, pr));
        g.theoretical_quantiles.push_back(chi2_quantile(pr, df));
      }
      mr.gof = g;
    }
    if (mr.n_failed > 0) report.had_failures = true;
    if (static_cast<double>(mr.n_failed) > 0.05 * static_cast<double>(scn.n_replicates)) {
      std::string first_failure;
      for (std::size_t rep = 0; rep < scn.n_replicates && first_failure.empty(); ++rep) {
        first_failure = slots[rep * n_methods + k].record.failure;
      }
      std::ostringstream os;
      os << "scenario '" << scn.name << "': method " << to_string(mr.method) << " failed on " << mr.n_failed << " of "
         << scn.n_replicates << " replicates (> 5%); first failure: " << first_failure;
      throw ScenarioError(os.str());
    }
    report.methods.push_back(std::move(mr));
  }
  report.replicates.reserve(slots.size());
  for (auto& s : slots) report.replicates.push_back(std::move(s.record));
  return report;
}

SimScenario eeg_mimic_scenario() {
  SimScenario scn;
  scn.name = "eeg_mimic";
  scn.n_subjects = 157;
  scn.intercept = true;

  const std::vector<std::pair<std::string, std::size_t>> regions = {
      {"left_fc", 7}, {"middle_fc", 7}, {"right_fc", 7}, {"left_po", 8}, {"middle_po", 9}, {"right_po", 8}};
  const std::vector<std::string> erps = {"P2", "P750", "LSW"};
  std::vector<BlockSpec> blocks;
  for (const auto& erp : erps) {
    for (const auto& [region, size] : regions) blocks.push_back({region + "_" + erp, size, Structure::CS});
  }
  scn.partition = BlockPartition(std::move(blocks));

  CovariateRecipe age;
  age.kind = CovariateRecipe::Kind::Uniform01;
  CovariateRecipe voice;
  voice.kind = CovariateRecipe::Kind::Alternating01;
  CovariateRecipe sufficiency;
  sufficiency.kind = CovariateRecipe::Kind::Bernoulli;
  sufficiency.q = 0.32;
  scn.covariates = {age, voice, sufficiency};

  scn.beta0 = VectorXd(4);
  scn.beta0 << 0.2, 0.1, 0.05, -0.25;
  scn.within_block = {1.0, 0.6};
  scn.between_recipe.seed = 157;
  scn.between_recipe.scale = 0.5;
  scn.between_recipe.eigen_floor = 0.1;
  scn.n_replicates = 100;
  scn.seed = 2018;
  scn.methods = {SimMethod::Dimm, SimMethod::GeeCS};
  return scn;
}

}  // namespace dimm
