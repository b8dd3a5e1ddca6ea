#pragma once

#include "hmmgl/em_engine.hpp"
#include "hmmgl/glasso.hpp"
#include "hmmgl/pruning.hpp"
#include "hmmgl/simbench.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace hmmgl {

using json = nlohmann::json;

struct CsvOptions {
  char delimiter = ',';
  bool header = false;
};

/// Reads a rectangular numeric table (rows = observations). Errors name the
/// offending line; an empty table is an error.
Matrix read_matrix(const std::string& path, const CsvOptions& options = {});
Matrix parse_matrix(std::istream& in, const CsvOptions& options = {},
                    const std::string& source = "<stream>");

void write_matrix(const std::string& path, const Matrix& m, char delimiter = ',');
void write_labels(const std::string& path, const std::vector<int>& labels);
std::vector<int> read_labels(const std::string& path);

inline constexpr int kSchemaVersion = 1;

/// Persisted fit: model parameters plus the settings and diagnostics needed
/// to reproduce or audit it. Doubles round-trip bit-exactly.
struct ModelDocument {
  int schema_version = kSchemaVersion;
  Index n = 0;
  Index p = 0;
  // Resolved configuration.
  double lambda = 0.0;
  PenaltyKind penalty = PenaltyKind::parcor;
  CovarianceModel covariance = CovarianceModel::penalized;
  double eps = 1e-3;
  double pi_min = 0.0;
  int max_iter = 500;

  HmmModel model;
  std::vector<EdgeSet> edges;
  double bic = 0.0;
  double mmdl = 0.0;
  Termination termination = Termination::converged;
  int collapsed_state = -1;
  int iterations = 0;
  double log_likelihood = 0.0;
};

ModelDocument make_document(const FitResult& fit, const FitConfig& config);

json to_json(const HmmModel& model);
HmmModel model_from_json(const json& j);

json to_json(const ModelDocument& doc);
ModelDocument document_from_json(const json& j);

void save_document(const std::string& path, const ModelDocument& doc);
ModelDocument load_document(const std::string& path);

json to_json(const PruneTrace& trace, const FitConfig& config);

json to_json(const SimSpec& spec);
json to_json(const Exp1Row& row);
json to_json(const Exp2Row& row);

}  // namespace hmmgl
