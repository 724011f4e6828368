#include "mmgr/builtin.hpp"

#include "mmgr/error.hpp"

namespace mmgr {

namespace {

nlohmann::json parse_hyperparameters(std::string_view text) {
  auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    fail(ErrorCode::validation, "hyperparameters must be a JSON object");
  }
  return j;
}

template <class T>
T field(const nlohmann::json& hp, const char* key) {
  if (!hp.contains(key)) fail(ErrorCode::validation, std::string("missing hyperparameter: ") + key);
  try {
    return hp.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorCode::validation, std::string("mistyped hyperparameter: ") + key);
  }
}

}  // namespace

bool is_builtin(std::string_view algorithm) {
  return algorithm == kOlsAlgorithm || algorithm == kTuneAlgorithm;
}

std::string canonical_json(const nlohmann::json& value) { return value.dump(); }

bool is_canonical_json(std::string_view text) {
  auto j = nlohmann::json::parse(text, nullptr, false);
  return !j.is_discarded() && j.dump() == text;
}

std::string ols_hyperparameters(std::span<const std::string> features, std::string_view target, double lambda) {
  nlohmann::json hp;
  hp["features"] = std::vector<std::string>(features.begin(), features.end());
  hp["lambda"] = lambda;
  hp["target"] = target;
  return canonical_json(hp);
}

std::string tune_hyperparameters(std::string_view base_artifact_hash, double lambda, double tau) {
  nlohmann::json hp;
  hp["base_artifact"] = base_artifact_hash;
  hp["lambda"] = lambda;
  hp["tau"] = tau;
  return canonical_json(hp);
}

LinearModel run_builtin(std::string_view algorithm, std::string_view hyperparameters, const Table& table,
                        double train_fraction, std::uint64_t seed, ArtifactStore& artifacts) {
  const auto hp = parse_hyperparameters(hyperparameters);
  if (algorithm == kOlsAlgorithm) {
    const auto features = field<std::vector<std::string>>(hp, "features");
    FitOptions opt;
    opt.ridge_lambda = field<double>(hp, "lambda");
    opt.seed = seed;
    opt.train_fraction = train_fraction;
    return fit(table, features, field<std::string>(hp, "target"), opt);
  }
  if (algorithm == kTuneAlgorithm) {
    const auto base = deserialize(artifacts.get_blob(field<std::string>(hp, "base_artifact")));
    return tune(base, table, field<double>(hp, "lambda"), field<double>(hp, "tau"), seed, train_fraction);
  }
  fail(ErrorCode::unsupported, "algorithm is not built in: " + std::string(algorithm),
       Json{{"algorithm", algorithm}});
}

}  // namespace mmgr
