#include "hmmgl/io.hpp"

#include "hmmgl/model_selection.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace hmmgl {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_cell(std::string_view cell, const std::string& source, std::size_t line, std::size_t col) {
  const std::string_view t = trim(cell);
  double v = 0.0;
  const char* begin = t.data();
  const char* end = t.data() + t.size();
  if (!t.empty() && *begin == '+') ++begin;
  const auto res = std::from_chars(begin, end, v);
  if (t.empty() || res.ec != std::errc() || res.ptr != end || !std::isfinite(v)) {
    std::ostringstream msg;
    msg << source << ": line " << line << ", column " << col << ": '" << t << "' is not a finite number";
    throw std::runtime_error(msg.str());
  }
  return v;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  const Index rows = static_cast<Index>(j.size());
  const Index cols = rows > 0 ? static_cast<Index>(j.at(0).size()) : 0;
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    if (static_cast<Index>(j.at(r).size()) != cols) throw std::runtime_error("ragged matrix in document");
    for (Index c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
  }
  return m;
}

json vector_to_json(const Vector& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Vector vector_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
}

json edges_to_json(const EdgeSet& edges) {
  json out = json::array();
  for (const auto& [a, b] : edges) out.push_back({a, b});
  return out;
}

std::string_view to_string(CovarianceModel c) {
  return c == CovarianceModel::diagonal ? "diagonal" : "penalized";
}

CovarianceModel parse_covariance(std::string_view s) {
  if (s == "diagonal") return CovarianceModel::diagonal;
  if (s == "penalized") return CovarianceModel::penalized;
  throw std::runtime_error("unknown covariance model '" + std::string(s) + "'");
}

json fit_summary(const FitResult& fit) {
  json j;
  j["num_states"] = fit.num_states();
  j["termination"] = std::string(to_string(fit.termination));
  if (fit.termination == Termination::state_collapsed) j["collapsed_state"] = fit.collapsed_state;
  j["iterations"] = fit.iterations;
  j["log_likelihood"] = fit.resp.log_likelihood;
  j["pi"] = vector_to_json(fit.resp.pi);
  return j;
}

}  // namespace

Matrix parse_matrix(std::istream& in, const CsvOptions& options, const std::string& source) {
  std::vector<double> values;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::string line;
  std::size_t line_no = 0;
  bool header_pending = options.header;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    std::size_t fields = 0;
    std::string_view rest(line);
    for (;;) {
      const auto pos = rest.find(options.delimiter);
      ++fields;
      values.push_back(parse_cell(rest.substr(0, pos), source, line_no, fields));
      if (pos == std::string_view::npos) break;
      rest.remove_prefix(pos + 1);
    }
    if (rows == 0) {
      cols = fields;
    } else if (fields != cols) {
      std::ostringstream msg;
      msg << source << ": line " << line_no << " has " << fields << " fields, expected " << cols;
      throw std::runtime_error(msg.str());
    }
    ++rows;
  }
  if (rows == 0) throw std::runtime_error(source + ": no data rows");
  Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = values[r * cols + c];
  return m;
}

Matrix read_matrix(const std::string& path, const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return parse_matrix(in, options, path);
}

void write_matrix(const std::string& path, const Matrix& m, char delimiter) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << std::setprecision(17);
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      if (c > 0) out << delimiter;
      out << m(r, c);
    }
    out << '\n';
  }
}

void write_labels(const std::string& path, const std::vector<int>& labels) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  for (int l : labels) out << l << '\n';
}

std::vector<int> read_labels(const std::string& path) {
  const Matrix m = read_matrix(path);
  if (m.cols() != 1) throw std::runtime_error(path + ": expected a single column of labels");
  std::vector<int> labels;
  for (Index r = 0; r < m.rows(); ++r) labels.push_back(static_cast<int>(m(r, 0)));
  return labels;
}

ModelDocument make_document(const FitResult& fit, const FitConfig& config) {
  ModelDocument doc;
  doc.n = fit.resp.length();
  doc.p = fit.model.dim();
  doc.lambda = fit.lambda;
  doc.penalty = fit.penalty;
  doc.covariance = fit.covariance;
  doc.eps = config.eps;
  doc.pi_min = config.resolved_pi_min(doc.n);
  doc.max_iter = config.max_iter;
  doc.model = fit.model;
  for (const auto& s : fit.model.states) doc.edges.push_back(graph_of(s.precision()));
  doc.bic = score(fit, Criterion::bic).total;
  doc.mmdl = score(fit, Criterion::mmdl).total;
  doc.termination = fit.termination;
  doc.collapsed_state = fit.collapsed_state;
  doc.iterations = fit.iterations;
  doc.log_likelihood = fit.resp.log_likelihood;
  return doc;
}

json to_json(const HmmModel& model) {
  json j;
  j["num_states"] = model.num_states();
  j["dim"] = model.dim();
  j["transition"] = matrix_to_json(model.transition);
  j["initial"] = vector_to_json(model.initial);
  json states = json::array();
  for (const auto& s : model.states) {
    states.push_back({{"mean", vector_to_json(s.mean())}, {"precision", matrix_to_json(s.precision())}});
  }
  j["states"] = std::move(states);
  return j;
}

HmmModel model_from_json(const json& j) {
  HmmModel m;
  m.transition = matrix_from_json(j.at("transition"));
  m.initial = vector_from_json(j.at("initial"));
  for (const auto& s : j.at("states")) {
    m.states.push_back(
        GaussianState::from_precision(vector_from_json(s.at("mean")), matrix_from_json(s.at("precision"))));
  }
  m.validate();
  return m;
}

json to_json(const ModelDocument& doc) {
  json j;
  j["schema_version"] = doc.schema_version;
  j["n"] = doc.n;
  j["p"] = doc.p;
  j["config"] = {{"lambda", doc.lambda},
                 {"penalty", std::string(to_string(doc.penalty))},
                 {"covariance", std::string(to_string(doc.covariance))},
                 {"eps", doc.eps},
                 {"pi_min", doc.pi_min},
                 {"max_iter", doc.max_iter}};
  j["model"] = to_json(doc.model);
  json edges = json::array();
  for (const auto& e : doc.edges) edges.push_back(edges_to_json(e));
  j["edges"] = std::move(edges);
  j["scores"] = {{"bic", doc.bic}, {"mmdl", doc.mmdl}};
  j["termination"] = {{"kind", std::string(to_string(doc.termination))},
                      {"collapsed_state", doc.collapsed_state},
                      {"iterations", doc.iterations}};
  j["log_likelihood"] = doc.log_likelihood;
  return j;
}

ModelDocument document_from_json(const json& j) {
  ModelDocument doc;
  doc.schema_version = j.at("schema_version").get<int>();
  if (doc.schema_version != kSchemaVersion) {
    throw std::runtime_error("unsupported model document schema version " +
                             std::to_string(doc.schema_version));
  }
  doc.n = j.at("n").get<Index>();
  doc.p = j.at("p").get<Index>();
  const json& c = j.at("config");
  doc.lambda = c.at("lambda").get<double>();
  doc.penalty = parse_penalty_kind(c.at("penalty").get<std::string>());
  doc.covariance = parse_covariance(c.at("covariance").get<std::string>());
  doc.eps = c.at("eps").get<double>();
  doc.pi_min = c.at("pi_min").get<double>();
  doc.max_iter = c.at("max_iter").get<int>();
  doc.model = model_from_json(j.at("model"));
  for (const auto& state_edges : j.at("edges")) {
    EdgeSet e;
    for (const auto& pair : state_edges) e.emplace_back(pair.at(0).get<int>(), pair.at(1).get<int>());
    doc.edges.push_back(std::move(e));
  }
  doc.bic = j.at("scores").at("bic").get<double>();
  doc.mmdl = j.at("scores").at("mmdl").get<double>();
  const json& t = j.at("termination");
  doc.termination = parse_termination(t.at("kind").get<std::string>());
  doc.collapsed_state = t.at("collapsed_state").get<int>();
  doc.iterations = t.at("iterations").get<int>();
  doc.log_likelihood = j.at("log_likelihood").get<double>();
  return doc;
}

void save_document(const std::string& path, const ModelDocument& doc) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << to_json(doc).dump(2) << '\n';
}

ModelDocument load_document(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return document_from_json(json::parse(in));
}

json to_json(const PruneTrace& trace, const FitConfig& config) {
  json j;
  j["criterion"] = std::string(to_string(trace.criterion));
  j["selected_k"] = trace.selected_k;
  json steps = json::array();
  for (const auto& s : trace.steps) {
    json step;
    step["k"] = s.num_states;
    switch (s.action.kind) {
      case PruneAction::Kind::initial: step["action"] = {{"kind", "initial"}}; break;
      case PruneAction::Kind::merge:
        step["action"] = {{"kind", "merge"}, {"states", {s.action.first, s.action.second}}};
        break;
      case PruneAction::Kind::remove:
        step["action"] = {{"kind", "delete"}, {"state", s.action.first}};
        break;
    }
    if (s.action.kind != PruneAction::Kind::initial) {
      auto finite_or_null = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
      step["candidates"] = {{"merge", finite_or_null(s.merge_score)},
                            {"delete", finite_or_null(s.delete_score)}};
    }
    step["bic"] = s.bic.total;
    step["mmdl"] = s.mmdl.total;
    step["fit"] = fit_summary(s.fit);
    steps.push_back(std::move(step));
  }
  j["steps"] = std::move(steps);
  j["selected_model"] = to_json(make_document(trace.selected().fit, config));
  return j;
}

json to_json(const SimSpec& spec) {
  return {{"model", spec.model_id}, {"k_true", spec.k_true}, {"n", spec.n},
          {"p", spec.p},            {"alpha", spec.alpha},   {"seed", spec.seed}};
}

json to_json(const Exp1Row& row) {
  json j = to_json(row.spec);
  j["experiment"] = 1;
  j["replicate"] = row.replicate;
  j["method"] = std::string(to_string(row.method));
  j["criterion"] = std::string(to_string(row.criterion));
  j["selected_K"] = row.selected_k;
  j["ARI"] = std::isfinite(row.ari) ? json(row.ari) : json(nullptr);
  j["runtime"] = row.runtime_s;
  return j;
}

json to_json(const Exp2Row& row) {
  json j = to_json(row.spec);
  j["experiment"] = 2;
  j["replicate"] = row.replicate;
  j["method"] = std::string(to_string(row.method));
  j["state"] = row.state;
  j["TPR"] = row.metrics.tpr;
  j["FPR"] = row.metrics.fpr;
  j["true_edges"] = row.metrics.true_edges;
  j["estimated_edges"] = row.metrics.estimated_edges;
  return j;
}

}  // namespace hmmgl
