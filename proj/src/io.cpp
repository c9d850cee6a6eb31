#include "epem/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "epem/fixed_point.hpp"
#include "epem/sampler.hpp"

namespace epem {

namespace {

using Json = nlohmann::ordered_json;

std::string trimmed(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> splitCells(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(trimmed(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  cells.push_back(trimmed(cur));
  return cells;
}

bool parseNumber(const std::string& cell, double& out) {
  if (cell.empty()) return false;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  if (*begin == '+') ++begin;
  const auto result = std::from_chars(begin, end, out);
  return result.ec == std::errc() && result.ptr == end;
}

std::string formatNumber(double v) {
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof(buf), v);
  if (result.ec != std::errc()) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
  }
  return std::string(buf, result.ptr);
}

std::vector<std::string> readLines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && trimmed(lines.back()).empty()) lines.pop_back();
  return lines;
}

}  // namespace

Dataset readCsv(const std::string& path, bool hasHeader) {
  const std::vector<std::string> lines = readLines(path);
  if (lines.empty()) throw std::runtime_error("empty file: " + path);

  Dataset ds;
  std::size_t first = 0;
  if (hasHeader) {
    ds.columnNames = splitCells(lines[0]);
    first = 1;
    if (lines.size() == first)
      throw std::runtime_error(path + ": header but no data rows");
  }

  std::vector<std::vector<double>> rows;
  std::size_t width = 0;
  for (std::size_t k = first; k < lines.size(); ++k) {
    const std::size_t lineNo = k + 1;
    if (trimmed(lines[k]).empty())
      throw std::runtime_error(path + ": line " + std::to_string(lineNo) +
                               " is blank");
    const std::vector<std::string> cells = splitCells(lines[k]);
    if (width == 0) {
      width = cells.size();
    } else if (cells.size() != width) {
      throw std::runtime_error(
          path + ": line " + std::to_string(lineNo) + " has " +
          std::to_string(cells.size()) + " cells, expected " +
          std::to_string(width));
    }
    std::vector<double> row(width);
    for (std::size_t j = 0; j < width; ++j) {
      double v = 0.0;
      if (!parseNumber(cells[j], v))
        throw std::runtime_error(path + ": line " + std::to_string(lineNo) +
                                 ", column " + std::to_string(j + 1) +
                                 ": not a number: '" + cells[j] + "'");
      if (!std::isfinite(v))
        throw std::runtime_error(path + ": line " + std::to_string(lineNo) +
                                 ", column " + std::to_string(j + 1) +
                                 ": non-finite value '" + cells[j] + "'");
      row[j] = v;
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error(path + ": no data rows");
  if (hasHeader && ds.columnNames.size() != width)
    throw std::runtime_error(path + ": header width does not match data");

  ds.X.resize(static_cast<int>(rows.size()), static_cast<int>(width));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < width; ++j)
      ds.X(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
  return ds;
}

bool csvHasHeader(const std::string& path) {
  const std::vector<std::string> lines = readLines(path);
  for (const std::string& line : lines) {
    if (trimmed(line).empty()) continue;
    for (const std::string& cell : splitCells(line)) {
      double v = 0.0;
      if (!parseNumber(cell, v)) return true;
    }
    return false;
  }
  return false;
}

void writeCsv(const std::string& path, const Matrix& X,
              const std::vector<std::string>& columnNames) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  if (!columnNames.empty()) {
    if (static_cast<int>(columnNames.size()) != X.cols())
      throw std::invalid_argument("column name count does not match data");
    for (std::size_t j = 0; j < columnNames.size(); ++j) {
      if (j > 0) out << ',';
      out << columnNames[j];
    }
    out << '\n';
  }
  for (int i = 0; i < X.rows(); ++i) {
    for (int j = 0; j < X.cols(); ++j) {
      if (j > 0) out << ',';
      out << formatNumber(X(i, j));
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

Standardizer fitStandardizer(const Matrix& X) {
  const int N = static_cast<int>(X.rows());
  if (N < 2) throw std::invalid_argument("need at least two rows to scale");
  Standardizer s;
  s.mean = X.colwise().mean().transpose();
  const Matrix C = X.rowwise() - s.mean.transpose();
  const Vector var =
      (C.cwiseProduct(C).colwise().sum() / static_cast<double>(N - 1))
          .transpose();
  for (int j = 0; j < var.size(); ++j)
    if (!(var[j] > 0.0))
      throw std::invalid_argument("column " + std::to_string(j + 1) +
                                  " has zero variance");
  s.sd = var.cwiseSqrt();
  return s;
}

Matrix applyStandardizer(const Matrix& X, const Standardizer& s) {
  return (X.rowwise() - s.mean.transpose()) *
         s.sd.cwiseInverse().asDiagonal();
}

MixtureParams backTransform(const MixtureParams& params,
                            const Standardizer& s) {
  const int G = params.spec.G;
  const int p = params.spec.p;
  MixtureParams out;
  out.spec = ModelSpec{ScaleStructure::VVV, params.spec.beta, G, p};
  out.pi = params.pi;
  out.beta = params.beta;
  out.mu.resize(G);
  ScaleDecomposition scale(ScaleStructure::VVV, G, p);
  for (int g = 0; g < G; ++g) {
    out.mu[g] = s.mean + s.sd.cwiseProduct(params.mu[g]);
    const Matrix sigma = s.sd.asDiagonal() *
                         reconstructSigma(params.scale, g) *
                         s.sd.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma);
    scale.setEigenvalues(g, eig.eigenvalues().cwiseMax(1e-300));
    scale.setGamma(g, eig.eigenvectors());
  }
  canonicalizeScale(scale);
  out.scale = scale;
  return out;
}

namespace {

Json vectorNode(const Vector& v) {
  Json node = Json::array();
  for (int i = 0; i < v.size(); ++i) node.push_back(v[i]);
  return node;
}

Json matrixNode(const Matrix& m) {
  Json node = Json::array();
  for (int i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    node.push_back(std::move(row));
  }
  return node;
}

Vector vectorFromNode(const Json& node) {
  Vector v(node.size());
  for (std::size_t i = 0; i < node.size(); ++i)
    v[static_cast<int>(i)] = node[i].get<double>();
  return v;
}

Matrix matrixFromNode(const Json& node) {
  const int rows = static_cast<int>(node.size());
  const int cols = rows > 0 ? static_cast<int>(node[0].size()) : 0;
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = node[i][j].get<double>();
  return m;
}

Json paramsNode(const MixtureParams& params) {
  const ScaleDecomposition& scale = params.scale;
  Json node;
  node["model"] = modelName(params.spec);
  node["structure"] = scaleStructureName(params.spec.structure);
  node["beta_constraint"] =
      params.spec.beta == BetaConstraint::Equal ? "equal" : "variable";
  node["G"] = params.spec.G;
  node["p"] = params.spec.p;
  node["pi"] = vectorNode(params.pi);
  node["beta"] = vectorNode(params.beta);
  Json mu = Json::array();
  for (const Vector& m : params.mu) mu.push_back(vectorNode(m));
  node["mu"] = std::move(mu);

  Json sc;
  sc["lambda_shared"] = scale.storedLambdaCount() == 1;
  sc["delta_shared"] = scale.storedDeltaCount() == 1;
  sc["gamma_shared"] = scale.storedGammaCount() == 1;
  Json lambda = Json::array();
  for (int t = 0; t < scale.storedLambdaCount(); ++t)
    lambda.push_back(scale.lambda(t));
  sc["lambda"] = std::move(lambda);
  Json delta = Json::array();
  for (int t = 0; t < scale.storedDeltaCount(); ++t)
    delta.push_back(vectorNode(scale.delta(t)));
  sc["delta"] = std::move(delta);
  Json gamma = Json::array();
  for (int t = 0; t < scale.storedGammaCount(); ++t)
    gamma.push_back(matrixNode(scale.gamma(t)));
  sc["gamma"] = std::move(gamma);
  node["scale"] = std::move(sc);
  return node;
}

MixtureParams paramsFromNode(const Json& node) {
  MixtureParams params;
  const int G = node.at("G").get<int>();
  const int p = node.at("p").get<int>();
  params.spec = decodeModelName(node.at("model").get<std::string>(), G, p);
  params.pi = vectorFromNode(node.at("pi"));
  params.beta = vectorFromNode(node.at("beta"));
  for (const Json& m : node.at("mu")) params.mu.push_back(vectorFromNode(m));

  ScaleDecomposition scale(params.spec.structure, G, p);
  const Json& sc = node.at("scale");
  const Json& lambda = sc.at("lambda");
  for (std::size_t t = 0; t < lambda.size(); ++t)
    scale.setLambda(static_cast<int>(t), lambda[t].get<double>());
  const Json& delta = sc.at("delta");
  for (std::size_t t = 0; t < delta.size(); ++t)
    scale.setDelta(static_cast<int>(t), vectorFromNode(delta[t]));
  const Json& gamma = sc.at("gamma");
  for (std::size_t t = 0; t < gamma.size(); ++t)
    scale.setGamma(static_cast<int>(t), matrixFromNode(gamma[t]));
  params.scale = scale;
  validateParams(params);
  return params;
}

}  // namespace

std::string paramsToJson(const MixtureParams& params) {
  return paramsNode(params).dump(2);
}

MixtureParams paramsFromJson(const std::string& text) {
  return paramsFromNode(Json::parse(text));
}

std::vector<ScaleStructure> parseStructureList(const std::string& text) {
  const std::string t = trimmed(text);
  if (t.empty() || t == "all") return {};
  std::vector<ScaleStructure> out;
  std::stringstream ss(t);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::string name = trimmed(item);
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return std::toupper(c); });
    out.push_back(parseScaleStructure(name));
  }
  if (out.empty()) throw std::invalid_argument("no structures requested");
  return out;
}

std::vector<BetaConstraint> parseBetaMode(const std::string& text) {
  std::string t = trimmed(text);
  std::transform(t.begin(), t.end(), t.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (t == "equal") return {BetaConstraint::Equal};
  if (t == "variable") return {BetaConstraint::Variable};
  if (t == "both" || t.empty())
    return {BetaConstraint::Equal, BetaConstraint::Variable};
  throw std::invalid_argument(
      "shape constraint must be equal, variable or both");
}

namespace {

void writeText(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string siblingPath(const std::string& path, const std::string& suffix) {
  const std::size_t slash = path.find_last_of("/\\");
  const std::size_t dot = path.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
    return path + suffix;
  return path.substr(0, dot) + suffix;
}

Json configNode(const RunConfig& cfg) {
  Json node;
  node["input"] = cfg.inputPath;
  node["g_min"] = cfg.gMin;
  node["g_max"] = cfg.gMax;
  node["models"] = cfg.models;
  node["beta"] = cfg.betaMode;
  node["scale"] = cfg.scale;
  node["seed"] = cfg.seed;
  node["epsilon"] = cfg.aitkenEpsilon;
  node["max_iter"] = cfg.maxIter;
  node["format"] = cfg.format;
  return node;
}

Json modelRow(const FitCell& cell) {
  Json row;
  row["name"] = modelName(cell.spec);
  row["G"] = cell.spec.G;
  row["ok"] = cell.ok;
  if (cell.ok) {
    row["loglik"] = cell.report.logLik;
    row["m"] = totalFreeParams(cell.spec);
    row["bic"] = cell.bicValue;
    row["icl"] = cell.iclValue;
    row["converged"] = cell.report.converged;
    row["iterations"] = cell.report.iterations;
  } else {
    row["error"] = cell.error;
    row["detail"] = cell.errorDetail;
  }
  if (!cell.note.empty()) row["note"] = cell.note;
  return row;
}

Json winnerNode(const FitCell& cell, const Standardizer* standardizer) {
  Json node;
  node["name"] = modelName(cell.spec);
  node["G"] = cell.spec.G;
  node["loglik"] = cell.report.logLik;
  node["m"] = totalFreeParams(cell.spec);
  node["bic"] = cell.bicValue;
  node["icl"] = cell.iclValue;
  node["converged"] = cell.report.converged;
  node["iterations"] = cell.report.iterations;
  node["parameters"] = paramsNode(cell.report.params);
  if (standardizer != nullptr)
    node["parameters_original_scale"] =
        paramsNode(backTransform(cell.report.params, *standardizer));
  node["map_labels"] = cell.report.labels;
  node["loglik_trace"] = cell.report.logLikTrace;
  return node;
}

std::string summaryCsv(const FamilySearchResult& res) {
  std::ostringstream out;
  out << "name,G,ok,loglik,m,bic,icl,converged,iterations,error,best_bic,"
         "best_icl\n";
  for (std::size_t i = 0; i < res.grid.size(); ++i) {
    const FitCell& cell = res.grid[i];
    out << modelName(cell.spec) << ',' << cell.spec.G << ','
        << (cell.ok ? 1 : 0) << ',';
    if (cell.ok) {
      out << formatNumber(cell.report.logLik) << ','
          << totalFreeParams(cell.spec) << ',' << formatNumber(cell.bicValue)
          << ',' << formatNumber(cell.iclValue) << ','
          << (cell.report.converged ? 1 : 0) << ','
          << cell.report.iterations << ",,";
    } else {
      out << ",,,,,," << cell.error << ',';
    }
    out << (static_cast<int>(i) == res.bestByBic ? 1 : 0) << ','
        << (static_cast<int>(i) == res.bestByIcl ? 1 : 0) << '\n';
  }
  return out.str();
}

}  // namespace

int runFit(const RunConfig& cfg) {
  Json doc;
  doc["command"] = "fit";
  doc["config"] = configNode(cfg);
  try {
    const Dataset ds = readCsv(cfg.inputPath, csvHasHeader(cfg.inputPath));
    Matrix X = ds.X;
    Standardizer standardizer;
    if (cfg.scale) {
      standardizer = fitStandardizer(X);
      X = applyStandardizer(X, standardizer);
    }
    Json data;
    data["rows"] = static_cast<int>(X.rows());
    data["cols"] = static_cast<int>(X.cols());
    data["columns"] = ds.columnNames;
    data["standardized"] = cfg.scale;
    doc["data"] = std::move(data);
    doc["criteria"] = "larger_is_better";

    FamilySearchConfig fs;
    fs.structures = parseStructureList(cfg.models);
    fs.betaConstraints = parseBetaMode(cfg.betaMode);
    fs.gMin = cfg.gMin;
    fs.gMax = cfg.gMax;
    fs.seed = cfg.seed;
    fs.fit.maxIter = cfg.maxIter;
    fs.fit.aitkenEpsilon = cfg.aitkenEpsilon;
    const FamilySearchResult res = familySearch(X, fs);

    Json models = Json::array();
    for (const FitCell& cell : res.grid) {
      if (!cell.note.empty())
        std::cerr << modelName(cell.spec) << " G=" << cell.spec.G << ": "
                  << cell.note << '\n';
      models.push_back(modelRow(cell));
    }
    doc["models"] = std::move(models);

    if (res.bestByBic < 0) {
      Json error;
      error["message"] = "every model in the search grid failed";
      doc["error"] = std::move(error);
      if (cfg.format == "csv-summary")
        writeText(cfg.outputPath, summaryCsv(res));
      else
        writeText(cfg.outputPath, doc.dump(2) + "\n");
      return 1;
    }

    const Standardizer* sp = cfg.scale ? &standardizer : nullptr;
    doc["best_by_bic"] = winnerNode(res.grid[res.bestByBic], sp);
    doc["best_by_icl"] = winnerNode(res.grid[res.bestByIcl], sp);

    if (cfg.format == "csv-summary")
      writeText(cfg.outputPath, summaryCsv(res));
    else
      writeText(cfg.outputPath, doc.dump(2) + "\n");
    return 0;
  } catch (const std::exception& e) {
    if (cfg.format == "csv-summary") {
      std::cerr << "error: " << e.what() << '\n';
    } else {
      Json error;
      error["message"] = e.what();
      doc["error"] = std::move(error);
      try {
        writeText(cfg.outputPath, doc.dump(2) + "\n");
      } catch (const std::exception& inner) {
        std::cerr << "error: " << inner.what() << '\n';
      }
    }
    return 1;
  }
}

int runSimulate(const SimulateConfig& cfg) {
  try {
    const SimScenario scenario = parseScenario(cfg.scenario);
    const SimulatedData sim = generateScenario(scenario, cfg.n, cfg.seed);
    std::vector<std::string> names;
    for (int j = 0; j < sim.X.cols(); ++j)
      names.push_back("x" + std::to_string(j + 1));
    if (cfg.outputPath.empty())
      throw std::invalid_argument("simulate needs an output path");
    writeCsv(cfg.outputPath, sim.X, names);

    Json truth;
    truth["scenario"] = sim.scenario;
    truth["seed"] = cfg.seed;
    truth["rows"] = static_cast<int>(sim.X.rows());
    truth["cols"] = static_cast<int>(sim.X.cols());
    truth["weights"] = vectorNode(sim.weights);
    Json comps = Json::array();
    for (const ComponentTruth& c : sim.components) {
      Json node;
      node["kind"] = c.kind;
      node["mu"] = vectorNode(c.mu);
      node["sigma"] = matrixNode(c.sigma);
      if (c.kind == "mpe") node["beta"] = c.beta;
      if (c.kind == "student") node["dof"] = c.dof;
      comps.push_back(std::move(node));
    }
    truth["components"] = std::move(comps);
    truth["labels"] = sim.labels;
    writeText(siblingPath(cfg.outputPath, ".truth.json"),
              truth.dump(2) + "\n");
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

int runFpLab(const FpLabConfig& cfg) {
  try {
    if (cfg.betas.empty())
      throw std::invalid_argument("need at least one shape value");
    std::ostringstream out;
    out << "beta,method,iteration,loglik,diverged\n";
    for (std::size_t b = 0; b < cfg.betas.size(); ++b) {
      const double beta = cfg.betas[b];
      Rng rng = makeRng(deriveSeed(cfg.seed, b));
      const Matrix X = sampleMpe(cfg.n, Vector::Zero(cfg.p),
                                 Matrix::Identity(cfg.p, cfg.p), beta, rng);
      const TrajectoryPair pair =
          compareTrajectories(X, Vector::Zero(cfg.p), beta, cfg.iterations);
      for (const TrajectoryRecord* rec : {&pair.fixedPoint, &pair.gem}) {
        for (std::size_t k = 0; k < rec->logLik.size(); ++k) {
          out << formatNumber(beta) << ',' << trajectoryMethodName(rec->method)
              << ',' << k << ',' << formatNumber(rec->logLik[k]) << ','
              << (rec->diverged ? 1 : 0) << '\n';
        }
      }
    }
    writeText(cfg.outputPath, out.str());
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace epem
