#include "dimm/config.hpp"

#include "dimm/error.hpp"

#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace dimm {

using json = nlohmann::ordered_json;

namespace {

// Typed access into a JSON object that reports the full field path on error
// and rejects keys outside the schema.
class Fields {
 public:
  Fields(const json& obj, std::string path, std::set<std::string> allowed) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) fail(path_.empty() ? "<root>" : path_, "expected an object");
    for (const auto& [key, _] : obj_.items()) {
      if (!allowed.count(key)) fail(at(key), "unknown field");
    }
  }

  [[nodiscard]] bool has(const std::string& key) const { return obj_.contains(key) && !obj_.at(key).is_null(); }
  [[nodiscard]] const json& raw(const std::string& key) const {
    if (!has(key)) fail(at(key), "required field is missing");
    return obj_.at(key);
  }
  [[nodiscard]] std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  [[nodiscard]] double number(const std::string& key) const {
    const auto& v = raw(key);
    if (!v.is_number()) fail(at(key), "expected a number");
    return v.get<double>();
  }
  [[nodiscard]] double number_or(const std::string& key, double dflt) const { return has(key) ? number(key) : dflt; }

  [[nodiscard]] std::size_t count(const std::string& key) const {
    const auto& v = raw(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) fail(at(key), "expected a non-negative integer");
    return v.get<std::size_t>();
  }
  [[nodiscard]] std::size_t count_or(const std::string& key, std::size_t dflt) const { return has(key) ? count(key) : dflt; }

  [[nodiscard]] std::uint64_t u64(const std::string& key) const {
    const auto& v = raw(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      fail(at(key), "expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  [[nodiscard]] bool boolean_or(const std::string& key, bool dflt) const {
    if (!has(key)) return dflt;
    const auto& v = raw(key);
    if (!v.is_boolean()) fail(at(key), "expected true or false");
    return v.get<bool>();
  }

  [[nodiscard]] std::string string(const std::string& key) const {
    const auto& v = raw(key);
    if (!v.is_string()) fail(at(key), "expected a string");
    return v.get<std::string>();
  }

  [[nodiscard]] std::vector<double> numbers(const std::string& key) const {
    const auto& v = raw(key);
    if (!v.is_array()) fail(at(key), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) fail(at(key) + "[" + std::to_string(i) + "]", "expected a number");
      out.push_back(v[i].get<double>());
    }
    return out;
  }

  [[nodiscard]] std::vector<std::string> strings_or_empty(const std::string& key) const {
    if (!has(key)) return {};
    const auto& v = raw(key);
    if (!v.is_array()) fail(at(key), "expected an array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_string()) fail(at(key) + "[" + std::to_string(i) + "]", "expected a string");
      out.push_back(v[i].get<std::string>());
    }
    return out;
  }

  [[noreturn]] static void fail(const std::string& path, const std::string& msg) {
    throw ConfigError("config error at " + path + ": " + msg);
  }

 private:
  const json& obj_;
  std::string path_;
};

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void check_schema(const Fields& f) {
  if (f.has("schema_version") && f.count("schema_version") != static_cast<std::size_t>(kSchemaVersion)) {
    Fields::fail("schema_version", "unsupported version (expected " + std::to_string(kSchemaVersion) + ")");
  }
}

std::vector<BlockSpec> parse_blocks(const json& arr, const std::string& path) {
  if (!arr.is_array() || arr.empty()) Fields::fail(path, "expected a non-empty array of blocks");
  std::vector<BlockSpec> out;
  for (std::size_t j = 0; j < arr.size(); ++j) {
    const std::string where = path + "[" + std::to_string(j) + "]";
    const Fields b(arr[j], where, {"name", "size", "structure"});
    BlockSpec spec;
    spec.name = b.has("name") ? b.string("name") : "block" + std::to_string(j + 1);
    spec.size = b.count("size");
    if (spec.size < 2) Fields::fail(b.at("size"), "block size must be at least 2");
    const std::string s = b.has("structure") ? b.string("structure") : "AR1";
    try {
      spec.structure = structure_from_string(s);
    } catch (const ConfigError&) {
      Fields::fail(b.at("structure"), "unknown structure '" + s + "' (expected AR1 or CS)");
    }
    out.push_back(std::move(spec));
  }
  return out;
}

FitOptions parse_optimizer(const json& obj, const std::string& path) {
  const Fields o(obj, path,
                 {"simplex_max_iterations", "simplex_relative_tolerance", "max_iterations", "gradient_tolerance",
                  "start_sigma", "start_rho"});
  FitOptions opts;
  opts.simplex_max_iterations = static_cast<int>(o.count_or("simplex_max_iterations", 500));
  opts.simplex_relative_tolerance = o.number_or("simplex_relative_tolerance", 1e-10);
  opts.max_iterations = static_cast<int>(o.count_or("max_iterations", 1000));
  opts.gradient_tolerance = o.number_or("gradient_tolerance", 1e-8);
  opts.start_sigma = o.number_or("start_sigma", 1.0);
  opts.start_rho = o.number_or("start_rho", 0.0);
  if (!(opts.gradient_tolerance > 0.0)) Fields::fail(o.at("gradient_tolerance"), "must be positive");
  if (!(opts.start_sigma > 0.0)) Fields::fail(o.at("start_sigma"), "must be positive");
  return opts;
}

json optimizer_to_json(const FitOptions& o) {
  return {{"simplex_max_iterations", o.simplex_max_iterations},
          {"simplex_relative_tolerance", o.simplex_relative_tolerance},
          {"max_iterations", o.max_iterations},
          {"gradient_tolerance", o.gradient_tolerance},
          {"start_sigma", o.start_sigma},
          {"start_rho", o.start_rho}};
}

}  // namespace

std::size_t default_worker_count(std::size_t fallback) {
  const char* env = std::getenv(kWorkersEnv);
  if (env == nullptr) return fallback;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || v < 1) return fallback;
  return static_cast<std::size_t>(v);
}

FitConfig parse_fit_config(const std::string& json_text, const std::filesystem::path& base_dir) {
  const json root = parse_json(json_text);
  const Fields f(root, "",
                 {"schema_version", "response_path", "covariate_path", "blocks", "intercept", "blocks_to_integrate",
                  "workers", "optimizer", "output_path"});
  check_schema(f);
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };
  FitConfig cfg;
  cfg.response_path = resolve(f.string("response_path"));
  cfg.covariate_path = resolve(f.string("covariate_path"));
  cfg.blocks = parse_blocks(f.raw("blocks"), "blocks");
  cfg.intercept = f.boolean_or("intercept", true);
  cfg.blocks_to_integrate = f.strings_or_empty("blocks_to_integrate");
  cfg.workers = f.has("workers") ? f.count("workers") : default_worker_count(1);
  if (cfg.workers < 1) Fields::fail("workers", "must be at least 1");
  if (f.has("optimizer")) cfg.optimizer = parse_optimizer(f.raw("optimizer"), "optimizer");
  if (f.has("output_path")) cfg.output_path = resolve(f.string("output_path"));

  for (std::size_t k = 0; k < cfg.blocks_to_integrate.size(); ++k) {
    const auto& name = cfg.blocks_to_integrate[k];
    bool found = false;
    for (const auto& b : cfg.blocks) found = found || b.name == name;
    if (!found) {
      Fields::fail("blocks_to_integrate[" + std::to_string(k) + "]", "no block named '" + name + "'");
    }
  }
  return cfg;
}

FitConfig load_fit_config(const std::filesystem::path& path) {
  return parse_fit_config(read_file(path), path.parent_path());
}

SimScenario parse_scenario(const std::string& json_text) {
  const json root = parse_json(json_text);
  const Fields f(root, "",
                 {"schema_version", "name", "n_subjects", "intercept", "beta0", "blocks", "within_block",
                  "between_block", "covariates", "replicates", "seed", "methods", "workers", "subgroup", "optimizer"});
  check_schema(f);
  SimScenario scn;
  scn.name = f.has("name") ? f.string("name") : "scenario";
  scn.n_subjects = f.count("n_subjects");
  scn.intercept = f.boolean_or("intercept", true);
  const auto beta = f.numbers("beta0");
  scn.beta0 = Eigen::Map<const VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
  try {
    scn.partition = BlockPartition(parse_blocks(f.raw("blocks"), "blocks"));
  } catch (const PartitionError& e) {
    Fields::fail("blocks", e.what());
  }

  const Fields wb(f.raw("within_block"), "within_block", {"sigma", "rho"});
  scn.within_block = {wb.number("sigma"), wb.number("rho")};

  if (f.has("between_block")) {
    const Fields bb(f.raw("between_block"), "between_block", {"matrix", "random"});
    if (bb.has("matrix")) {
      const auto& rows = bb.raw("matrix");
      const auto j = scn.partition.n_blocks();
      if (!rows.is_array() || rows.size() != j) Fields::fail(bb.at("matrix"), "expected J rows");
      MatrixXd s(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j));
      for (std::size_t r = 0; r < j; ++r) {
        const auto where = bb.at("matrix") + "[" + std::to_string(r) + "]";
        if (!rows[r].is_array() || rows[r].size() != j) Fields::fail(where, "expected J entries");
        for (std::size_t c = 0; c < j; ++c) {
          if (!rows[r][c].is_number()) Fields::fail(where + "[" + std::to_string(c) + "]", "expected a number");
          s(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c].get<double>();
        }
      }
      scn.between_recipe.explicit_matrix = s;
    } else {
      const Fields rnd(bb.raw("random"), bb.at("random"), {"seed", "scale", "eigen_floor"});
      scn.between_recipe.seed = rnd.u64("seed");
      scn.between_recipe.scale = rnd.number_or("scale", 0.5);
      scn.between_recipe.eigen_floor = rnd.number_or("eigen_floor", 0.1);
    }
  } else {
    scn.between_recipe.explicit_matrix =
        MatrixXd::Identity(static_cast<Eigen::Index>(scn.partition.n_blocks()),
                           static_cast<Eigen::Index>(scn.partition.n_blocks()));
  }

  const auto& covs = f.raw("covariates");
  if (!covs.is_array()) Fields::fail("covariates", "expected an array");
  for (std::size_t k = 0; k < covs.size(); ++k) {
    const std::string where = "covariates[" + std::to_string(k) + "]";
    const Fields c(covs[k], where, {"type", "q", "probs", "of", "rho"});
    CovariateRecipe rec;
    const std::string type = c.string("type");
    try {
      rec.kind = covariate_kind_from_string(type);
    } catch (const ConfigError&) {
      Fields::fail(c.at("type"), "unknown covariate generator '" + type + "'");
    }
    using K = CovariateRecipe::Kind;
    if (rec.kind == K::Bernoulli) rec.q = c.number("q");
    if (rec.kind == K::Categorical) rec.probs = c.numbers("probs");
    if (rec.kind == K::MvNormalRows) rec.rho = c.number("rho");
    if (rec.kind == K::Interaction) {
      const auto of = c.numbers("of");
      if (of.size() != 2 || of[0] < 0 || of[1] < 0) Fields::fail(c.at("of"), "expected two covariate indices");
      rec.a = static_cast<std::size_t>(of[0]);
      rec.b = static_cast<std::size_t>(of[1]);
    }
    scn.covariates.push_back(std::move(rec));
  }

  scn.n_replicates = f.count("replicates");
  scn.seed = f.u64("seed");
  const auto methods = f.strings_or_empty("methods");
  for (std::size_t k = 0; k < methods.size(); ++k) {
    try {
      scn.methods.push_back(sim_method_from_string(methods[k]));
    } catch (const ConfigError&) {
      Fields::fail("methods[" + std::to_string(k) + "]", "unknown method '" + methods[k] + "'");
    }
  }
  if (scn.methods.empty()) scn.methods = {SimMethod::Dimm};
  scn.workers = f.has("workers") ? f.count("workers") : default_worker_count(1);
  if (scn.workers < 1) Fields::fail("workers", "must be at least 1");
  scn.subgroup = f.strings_or_empty("subgroup");
  if (f.has("optimizer")) scn.fit_options = parse_optimizer(f.raw("optimizer"), "optimizer");

  try {
    scn.validate();
  } catch (const ScenarioError& e) {
    throw ConfigError(std::string("config error: ") + e.what());
  }
  return scn;
}

SimScenario load_scenario(const std::filesystem::path& path) { return parse_scenario(read_file(path)); }

std::string scenario_to_json(const SimScenario& scn) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["name"] = scn.name;
  j["n_subjects"] = scn.n_subjects;
  j["intercept"] = scn.intercept;
  j["beta0"] = std::vector<double>(scn.beta0.data(), scn.beta0.data() + scn.beta0.size());
  json blocks = json::array();
  for (const auto& b : scn.partition.blocks()) {
    blocks.push_back({{"name", b.name}, {"size", b.size}, {"structure", to_string(b.structure)}});
  }
  j["blocks"] = blocks;
  j["within_block"] = {{"sigma", scn.within_block.sigma}, {"rho", scn.within_block.rho}};
  if (scn.between_recipe.explicit_matrix) {
    const auto& s = *scn.between_recipe.explicit_matrix;
    json rows = json::array();
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < s.cols(); ++c) row.push_back(s(r, c));
      rows.push_back(row);
    }
    j["between_block"] = {{"matrix", rows}};
  } else {
    j["between_block"] = {{"random",
                           {{"seed", scn.between_recipe.seed},
                            {"scale", scn.between_recipe.scale},
                            {"eigen_floor", scn.between_recipe.eigen_floor}}}};
  }
  json covs = json::array();
  for (const auto& c : scn.covariates) {
    json e = {{"type", to_string(c.kind)}};
    using K = CovariateRecipe::Kind;
    if (c.kind == K::Bernoulli) e["q"] = c.q;
    if (c.kind == K::Categorical) e["probs"] = c.probs;
    if (c.kind == K::MvNormalRows) e["rho"] = c.rho;
    if (c.kind == K::Interaction) e["of"] = {c.a, c.b};
    covs.push_back(e);
  }
  j["covariates"] = covs;
  j["replicates"] = scn.n_replicates;
  j["seed"] = scn.seed;
  json methods = json::array();
  for (auto m : scn.methods) methods.push_back(to_string(m));
  j["methods"] = methods;
  j["workers"] = scn.workers;
  j["subgroup"] = scn.subgroup;
  j["optimizer"] = optimizer_to_json(scn.fit_options);
  return j.dump(2);
}

VectorXd parse_number_list(const std::string& text) {
  std::vector<double> vals;
  std::istringstream is(text);
  std::string cell;
  while (std::getline(is, cell, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(cell, &used);
    } catch (const std::exception&) {
      throw ConfigError("'" + cell + "' in number list is not numeric");
    }
    if (cell.find_first_not_of(" \t", used) != std::string::npos) {
      throw ConfigError("'" + cell + "' in number list is not numeric");
    }
    vals.push_back(v);
  }
  if (vals.empty()) throw ConfigError("number list is empty");
  return Eigen::Map<VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

}  // namespace dimm
