#include "mhe/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mhe::io {
namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  return in;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

json bound_to_json(double v) {
  if (std::isinf(v)) return v > 0 ? json("inf") : json("-inf");
  return json(v);
}

double bound_from_json(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw std::invalid_argument("bad bound string: " + s);
  }
  return j.get<double>();
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return {};
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_data_csv(const std::filesystem::path& path, const DataBatch& data) {
  auto out = open_out(path);
  out << "t";
  for (Eigen::Index i = 0; i < data.u.rows(); ++i) out << ",u_" << i;
  for (Eigen::Index i = 0; i < data.y.rows(); ++i) out << ",y_" << i;
  out << "\n";
  for (int t = 0; t < data.length(); ++t) {
    out << t;
    for (Eigen::Index i = 0; i < data.u.rows(); ++i) out << ',' << format_double(data.u(i, t));
    for (Eigen::Index i = 0; i < data.y.rows(); ++i) out << ',' << format_double(data.y(i, t));
    out << "\n";
  }
}

DataBatch read_data_csv(const std::filesystem::path& path, int m, int p) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty data csv: " + path.string());
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (static_cast<int>(fields.size()) != 1 + m + p)
      throw std::runtime_error("bad data csv row: " + line);
    std::vector<double> vals;
    for (std::size_t i = 1; i < fields.size(); ++i) vals.push_back(std::stod(fields[i]));
    rows.push_back(std::move(vals));
  }
  DataBatch data;
  data.u.resize(m, static_cast<Eigen::Index>(rows.size()));
  data.y.resize(p, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t t = 0; t < rows.size(); ++t) {
    for (int i = 0; i < m; ++i) data.u(i, static_cast<Eigen::Index>(t)) = rows[t][i];
    for (int i = 0; i < p; ++i) data.y(i, static_cast<Eigen::Index>(t)) = rows[t][m + i];
  }
  return data;
}

void write_truth_csv(const std::filesystem::path& path, const Eigen::MatrixXd& states,
                     const Eigen::MatrixXd& disturbances) {
  auto out = open_out(path);
  out << "t";
  for (Eigen::Index i = 0; i < states.rows(); ++i) out << ",x_" << i;
  for (Eigen::Index i = 0; i < disturbances.rows(); ++i) out << ",w_" << i;
  out << "\n";
  for (Eigen::Index t = 0; t < states.cols(); ++t) {
    out << t;
    for (Eigen::Index i = 0; i < states.rows(); ++i) out << ',' << format_double(states(i, t));
    for (Eigen::Index i = 0; i < disturbances.rows(); ++i) {
      out << ',';
      if (t < disturbances.cols()) out << format_double(disturbances(i, t));
    }
    out << "\n";
  }
}

Eigen::MatrixXd read_truth_states(const std::filesystem::path& path, int n) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty truth csv: " + path.string());
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (static_cast<int>(fields.size()) < 1 + n)
      throw std::runtime_error("bad truth csv row: " + line);
    std::vector<double> vals;
    for (int i = 0; i < n; ++i) vals.push_back(std::stod(fields[1 + i]));
    rows.push_back(std::move(vals));
  }
  Eigen::MatrixXd states(n, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (int i = 0; i < n; ++i) states(i, static_cast<Eigen::Index>(t)) = rows[t][i];
  return states;
}

void write_trajectory_csv(const std::filesystem::path& path, const Eigen::MatrixXd& x,
                          const Eigen::MatrixXd& w,
                          const std::vector<std::pair<int, int>>& sources) {
  auto out = open_out(path);
  out << "j";
  for (Eigen::Index i = 0; i < x.rows(); ++i) out << ",x_" << i;
  for (Eigen::Index i = 0; i < w.rows(); ++i) out << ",w_" << i;
  out << ",source_tau,source_offset\n";
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    out << j;
    for (Eigen::Index i = 0; i < x.rows(); ++i) out << ',' << format_double(x(i, j));
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      out << ',';
      if (j < w.cols()) out << format_double(w(i, j));
    }
    if (j < static_cast<Eigen::Index>(sources.size()))
      out << ',' << sources[j].first << ',' << sources[j].second;
    else
      out << ",,";
    out << "\n";
  }
}

void write_profiles_csv(const std::filesystem::path& path,
                        const std::vector<GapProfile>& profiles) {
  auto out = open_out(path);
  out << "tau,N,j,gap\n";
  for (const auto& p : profiles)
    for (int j = 0; j <= p.N; ++j)
      out << p.tau << ',' << p.N << ',' << j << ',' << format_double(p.gaps[j]) << "\n";
}

void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows) {
  auto out = open_out(path);
  out << "N,J_ae,J_mhe,V_T,gap_ae,gap_mhe,sne_fie,sne_ae,sne_mhe,bound,status\n";
  for (const auto& r : rows) {
    out << r.N << ',' << format_double(r.J_ae) << ',' << format_double(r.J_mhe) << ','
        << format_double(r.V_T) << ',' << format_double(r.gap_ae) << ','
        << format_double(r.gap_mhe) << ',' << format_double(r.sne_fie) << ','
        << format_double(r.sne_ae) << ',' << format_double(r.sne_mhe) << ','
        << format_double(r.bound) << ',' << r.status << "\n";
  }
}

json box_to_json(const Box& box) {
  json lower = json::array(), upper = json::array();
  for (int i = 0; i < box.dim(); ++i) {
    lower.push_back(bound_to_json(box.lower[i]));
    upper.push_back(bound_to_json(box.upper[i]));
  }
  return json{{"lower", lower}, {"upper", upper}};
}

Box box_from_json(const json& j) {
  const auto& lo = j.at("lower");
  const auto& hi = j.at("upper");
  Eigen::VectorXd lower(static_cast<Eigen::Index>(lo.size()));
  Eigen::VectorXd upper(static_cast<Eigen::Index>(hi.size()));
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    lower[i] = bound_from_json(lo[i]);
    upper[i] = bound_from_json(hi[i]);
  }
  return Box(lower, upper);
}

json scenario_to_json(const Scenario& scenario) {
  json j;
  j["model"] = scenario.model.name;
  j["parameters"] = scenario.model.params;
  j["T"] = scenario.T;
  j["seed"] = scenario.seed;
  j["x0"] = vector_to_json(scenario.x0);
  j["sets"] = {{"X", box_to_json(scenario.sets.X)},
               {"U", box_to_json(scenario.sets.U)},
               {"W", box_to_json(scenario.sets.W)},
               {"V", box_to_json(scenario.sets.V)}};
  auto law_to_json = [](const NoiseLaw& law) {
    json out;
    out["kind"] = law.kind == LawKind::uniform_box ? "uniform" : "constant";
    if (law.kind == LawKind::constant) out["value"] = vector_to_json(law.value);
    return out;
  };
  j["w_law"] = law_to_json(scenario.w_law);
  j["v_law"] = law_to_json(scenario.v_law);
  j["resets"] = {{"period", scenario.resets.period}};
  if (scenario.resets.period > 0) j["resets"]["target"] = vector_to_json(scenario.resets.target);
  j["name"] = scenario.name;
  return j;
}

Scenario scenario_from_json(const json& j) {
  const std::string model_name = j.at("model").get<std::string>();
  Scenario sc;
  if (model_name == "scalar_integrator") {
    sc = motivating_scenario();
  } else if (model_name == "batch_reactor") {
    sc = batch_reactor_scenario(j.value("T", 400), j.value("seed", std::uint64_t{0}));
  } else {
    throw std::invalid_argument("unknown model: " + model_name);
  }
  if (j.contains("T")) sc.T = j.at("T").get<int>();
  if (j.contains("seed")) sc.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("x0")) sc.x0 = vector_from_json(j.at("x0"));
  if (j.contains("sets")) {
    const auto& sets = j.at("sets");
    if (sets.contains("X")) sc.sets.X = box_from_json(sets.at("X"));
    if (sets.contains("U")) sc.sets.U = box_from_json(sets.at("U"));
    if (sets.contains("W")) sc.sets.W = box_from_json(sets.at("W"));
    if (sets.contains("V")) sc.sets.V = box_from_json(sets.at("V"));
  }
  auto law_from_json = [](const json& lj) {
    NoiseLaw law;
    const std::string kind = lj.at("kind").get<std::string>();
    if (kind == "uniform") {
      law = NoiseLaw::uniform();
    } else if (kind == "constant") {
      law = NoiseLaw::constant(vector_from_json(lj.at("value")));
    } else {
      throw std::invalid_argument("unknown noise law: " + kind);
    }
    return law;
  };
  if (j.contains("w_law")) sc.w_law = law_from_json(j.at("w_law"));
  if (j.contains("v_law")) sc.v_law = law_from_json(j.at("v_law"));
  if (j.contains("resets")) {
    sc.resets.period = j.at("resets").value("period", 0);
    if (sc.resets.period > 0) sc.resets.target = vector_from_json(j.at("resets").at("target"));
  }
  if (j.contains("name")) sc.name = j.at("name").get<std::string>();
  return sc;
}

json weights_to_json(const CostWeights& weights) {
  return json{{"Q", matrix_to_json(weights.Q)},
              {"R", matrix_to_json(weights.R)},
              {"G", matrix_to_json(weights.G)},
              {"terminal_mode",
               weights.terminal_mode == TerminalMode::filtering ? "filtering" : "prediction"}};
}

CostWeights weights_from_json(const json& j) {
  const std::string mode = j.value("terminal_mode", "filtering");
  if (mode != "filtering" && mode != "prediction")
    throw std::invalid_argument("unknown terminal_mode: " + mode);
  return make_cost_weights(matrix_from_json(j.at("Q")), matrix_from_json(j.at("R")),
                           matrix_from_json(j.at("G")),
                           mode == "filtering" ? TerminalMode::filtering
                                               : TerminalMode::prediction);
}

std::string status_name(SolveStatus status) {
  switch (status) {
    case SolveStatus::converged:
      return "converged";
    case SolveStatus::max_iter:
      return "max_iter";
    case SolveStatus::infeasible:
      return "infeasible";
  }
  return "unknown";
}

json report_to_json(const SolveReport& report) {
  json j;
  j["objective"] = report.objective;
  j["kkt_residual"] = report.kkt_residual;
  j["iterations"] = report.iterations;
  j["status"] = status_name(report.status);
  j["x"] = matrix_to_json(report.trajectory.x);
  j["w"] = matrix_to_json(report.trajectory.w);
  return j;
}

json fit_to_json(const EnvelopeFit& fit) {
  const char* side = fit.side == SideForm::left ? "left"
                     : fit.side == SideForm::right ? "right"
                                                   : "two_sided";
  return json{{"c", fit.c}, {"rho", fit.rho}, {"residual", fit.residual}, {"side", side}};
}

json perf_to_json(const PerfReport& report) {
  json j;
  j["J_candidate"] = report.J_candidate;
  j["V_T"] = report.V_T;
  j["gap"] = report.gap;
  j["gap_relative"] = report.gap_relative;
  j["averaged"] = report.averaged;
  if (report.bound) j["bound"] = *report.bound;
  if (report.sne) j["sne"] = *report.sne;
  return j;
}

void write_json(const std::filesystem::path& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << "\n";
}

json read_json(const std::filesystem::path& path) {
  auto in = open_in(path);
  json j;
  in >> j;
  return j;
}

}  // namespace mhe::io
