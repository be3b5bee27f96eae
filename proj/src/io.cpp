#include "affinelp/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace affinelp {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  while (first < last && *first == ' ') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    throw FormatError(where + ": cannot parse number '" + s + "'");
  }
  return v;
}

// Column counts per name prefix, in header order.
Eigen::Index count_prefix(const std::vector<std::string>& header,
                          const std::string& prefix) {
  Eigen::Index k = 0;
  for (const std::string& h : header) {
    if (h.rfind(prefix, 0) == 0) ++k;
  }
  return k;
}

void append_names(std::vector<std::string>& names, const std::string& prefix,
                  Eigen::Index count) {
  for (Eigen::Index i = 0; i < count; ++i) {
    names.push_back(prefix + std::to_string(i));
  }
}

std::string join(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += cells[i];
  }
  return out;
}

void append_values(std::vector<std::string>& cells, const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) cells.push_back(format_double(v(i)));
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path,
                                               std::vector<std::string>& header) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty file");
  header = split_csv(line);
  std::vector<std::vector<std::string>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = split_csv(line);
    if (cells.size() != header.size()) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) +
                        ": expected " + std::to_string(header.size()) +
                        " fields, got " + std::to_string(cells.size()));
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw FormatError(std::string("missing field '") + key + "'");
  }
  return j.at(key);
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const Json& j, const char* what) {
  if (!j.is_array()) throw FormatError(std::string(what) + ": expected array");
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols =
      rows > 0 && j[0].is_array() ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw FormatError(std::string(what) + ": ragged matrix");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const Json& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) throw FormatError(std::string(what) + ": non-number");
      m(i, c) = v.get<double>();
    }
  }
  return m;
}

Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Vector vector_from_json(const Json& j, const char* what) {
  if (!j.is_array()) throw FormatError(std::string(what) + ": expected array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw FormatError(std::string(what) + ": non-number");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

Json system_to_json(const AffineSystem& sys) {
  Json j;
  j["n"] = sys.n();
  j["m"] = sys.m();
  j["A"] = matrix_to_json(sys.A);
  j["B"] = matrix_to_json(sys.B);
  j["c"] = vector_to_json(sys.c);
  j["mu"] = vector_to_json(sys.mu);
  j["Sigma"] = matrix_to_json(sys.Sigma.matrix());
  j["gamma"] = sys.gamma;
  return j;
}

AffineSystem system_from_json(const Json& j) {
  AffineSystem sys;
  sys.A = matrix_from_json(field(j, "A"), "A");
  sys.B = matrix_from_json(field(j, "B"), "B");
  sys.c = vector_from_json(field(j, "c"), "c");
  sys.mu = j.contains("mu") ? vector_from_json(j["mu"], "mu")
                            : Vector::Zero(sys.A.rows());
  sys.Sigma = j.contains("Sigma")
                  ? SymMatrix::from_symmetric(matrix_from_json(j["Sigma"], "Sigma"))
                  : SymMatrix(sys.A.rows());
  if (!field(j, "gamma").is_number()) throw FormatError("gamma: non-number");
  sys.gamma = j["gamma"].get<double>();
  sys.validate();
  return sys;
}

Json cost_to_json(const StageCost& cost) {
  Json j;
  j["Lxx"] = matrix_to_json(cost.Lxx);
  j["Lxu"] = matrix_to_json(cost.Lxu);
  j["Luu"] = matrix_to_json(cost.Luu);
  j["Lx"] = vector_to_json(cost.Lx);
  j["Lu"] = vector_to_json(cost.Lu);
  j["Lc"] = cost.Lc;
  return j;
}

StageCost cost_from_json(const Json& j) {
  StageCost cost;
  cost.Lxx = matrix_from_json(field(j, "Lxx"), "Lxx");
  cost.Luu = matrix_from_json(field(j, "Luu"), "Luu");
  const Eigen::Index n = cost.Lxx.rows();
  const Eigen::Index m = cost.Luu.rows();
  cost.Lxu = j.contains("Lxu") ? matrix_from_json(j["Lxu"], "Lxu")
                               : Matrix::Zero(n, m);
  if (cost.Lxu.size() == 0) cost.Lxu = Matrix::Zero(n, m);
  cost.Lx = j.contains("Lx") ? vector_from_json(j["Lx"], "Lx") : Vector::Zero(n);
  cost.Lu = j.contains("Lu") ? vector_from_json(j["Lu"], "Lu") : Vector::Zero(m);
  cost.Lc = j.value("Lc", 0.0);
  return cost;
}

void write_dataset_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::vector<std::string> header;
  append_names(header, "x_", ds.n());
  append_names(header, "u_", ds.m());
  append_names(header, "xplus_", ds.n());
  if (ds.Omega) append_names(header, "omega_", ds.n());
  std::string text = join(header) + "\n";
  for (Eigen::Index j = 0; j < ds.length(); ++j) {
    std::vector<std::string> cells;
    append_values(cells, ds.X.col(j));
    append_values(cells, ds.U.col(j));
    append_values(cells, ds.Xplus.col(j));
    if (ds.Omega) append_values(cells, ds.Omega->col(j));
    text += join(cells) + "\n";
  }
  write_text(path, text);
}

Json dataset_header(const Dataset& ds) {
  Json j;
  j["n"] = ds.n();
  j["m"] = ds.m();
  j["d"] = ds.length();
  j["single_trajectory"] = ds.single_trajectory;
  j["has_omega"] = ds.Omega.has_value();
  j["deterministic"] = ds.is_deterministic();
  j["columns"] = Json::array({"x_*", "u_*", "xplus_*"});
  if (ds.Omega) j["columns"].push_back("omega_*");
  return j;
}

Dataset read_dataset_csv(const std::filesystem::path& path,
                         bool single_trajectory) {
  std::vector<std::string> header;
  const auto rows = read_csv(path, header);
  const Eigen::Index n = count_prefix(header, "x_");
  const Eigen::Index m = count_prefix(header, "u_");
  const Eigen::Index np = count_prefix(header, "xplus_");
  const Eigen::Index no = count_prefix(header, "omega_");
  if (n == 0 || m == 0 || np != n || (no != 0 && no != n) ||
      static_cast<Eigen::Index>(header.size()) != 2 * n + m + no) {
    throw FormatError(path.string() + ": unexpected dataset header");
  }
  if (rows.empty()) throw FormatError(path.string() + ": no data rows");
  const Eigen::Index d = static_cast<Eigen::Index>(rows.size());
  Dataset ds;
  ds.X.resize(n, d);
  ds.U.resize(m, d);
  ds.Xplus.resize(n, d);
  if (no) ds.Omega = Matrix(n, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const auto& cells = rows[static_cast<std::size_t>(j)];
    const std::string where = path.string() + ":" + std::to_string(j + 2);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < n; ++i) ds.X(i, j) = parse_double(cells[k++], where);
    for (Eigen::Index i = 0; i < m; ++i) ds.U(i, j) = parse_double(cells[k++], where);
    for (Eigen::Index i = 0; i < n; ++i) {
      ds.Xplus(i, j) = parse_double(cells[k++], where);
    }
    for (Eigen::Index i = 0; i < no; ++i) {
      (*ds.Omega)(i, j) = parse_double(cells[k++], where);
    }
  }
  ds.single_trajectory = single_trajectory;
  ds.validate();
  return ds;
}

void write_rows_csv(const std::vector<ConstraintRow>& rows, Eigen::Index n,
                    Eigen::Index m, const std::filesystem::path& path) {
  const Eigen::Index p = rows.empty() ? quad_param_count(n, m)
                                      : rows.front().rho.size();
  std::vector<std::string> header;
  append_names(header, "rho_", p);
  header.push_back("rhs");
  append_names(header, "x_", n);
  append_names(header, "u_", m);
  append_names(header, "w_", m);
  header.push_back("alpha_norm_sq");
  std::string text = join(header) + "\n";
  for (const ConstraintRow& r : rows) {
    std::vector<std::string> cells;
    append_values(cells, r.rho);
    cells.push_back(format_double(r.rhs));
    for (const Vector* v : {&r.meta.x, &r.meta.u, &r.meta.w}) {
      const Eigen::Index want = v == &r.meta.x ? n : m;
      if (v->size() == want) {
        append_values(cells, *v);
      } else {
        for (Eigen::Index i = 0; i < want; ++i) cells.emplace_back();
      }
    }
    cells.push_back(r.meta.alpha_norm_sq ? format_double(*r.meta.alpha_norm_sq)
                                         : std::string());
    text += join(cells) + "\n";
  }
  write_text(path, text);
}

std::vector<ConstraintRow> read_rows_csv(const std::filesystem::path& path) {
  std::vector<std::string> header;
  const auto rows = read_csv(path, header);
  const Eigen::Index p = count_prefix(header, "rho_");
  const Eigen::Index n = count_prefix(header, "x_");
  const Eigen::Index m = count_prefix(header, "u_");
  if (p == 0 || count_prefix(header, "w_") != m ||
      static_cast<Eigen::Index>(header.size()) != p + 2 + n + 2 * m) {
    throw FormatError(path.string() + ": unexpected constraint header");
  }
  std::vector<ConstraintRow> out;
  std::size_t lineno = 1;
  for (const auto& cells : rows) {
    const std::string where = path.string() + ":" + std::to_string(++lineno);
    ConstraintRow r;
    r.rho.resize(p);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < p; ++i) r.rho(i) = parse_double(cells[k++], where);
    r.rhs = parse_double(cells[k++], where);
    auto read_block = [&](Eigen::Index len) {
      if (cells[k].empty()) {
        k += len;
        return Vector();
      }
      Vector v(len);
      for (Eigen::Index i = 0; i < len; ++i) v(i) = parse_double(cells[k++], where);
      return v;
    };
    r.meta.x = read_block(n);
    r.meta.u = read_block(m);
    r.meta.w = read_block(m);
    if (!cells[k].empty()) r.meta.alpha_norm_sq = parse_double(cells[k], where);
    out.push_back(std::move(r));
  }
  return out;
}

void write_matrix_csv(const Matrix& m, const std::string& prefix,
                      const std::filesystem::path& path) {
  std::vector<std::string> header;
  append_names(header, prefix, m.rows());
  std::string text = join(header) + "\n";
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    std::vector<std::string> cells;
    append_values(cells, m.col(j));
    text += join(cells) + "\n";
  }
  write_text(path, text);
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
  std::vector<std::string> header;
  const auto rows = read_csv(path, header);
  Matrix m(static_cast<Eigen::Index>(header.size()),
           static_cast<Eigen::Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j) {
    const std::string where = path.string() + ":" + std::to_string(j + 2);
    for (std::size_t i = 0; i < header.size(); ++i) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          parse_double(rows[j][i], where);
    }
  }
  return m;
}

Json lp_to_json(const LPProblem& lp) {
  Json j;
  j["decision_dim"] = lp.decision_dim;
  j["objective"] = vector_to_json(lp.objective);
  j["bound"] = lp.bound ? Json(*lp.bound) : Json(nullptr);
  j["rows"] = lp.rows.size();
  j["mixed_covariance"] = lp.mixed_covariance;
  return j;
}

LPProblem lp_from_json(const Json& j, std::vector<ConstraintRow> rows) {
  LPProblem lp;
  lp.objective = vector_from_json(field(j, "objective"), "objective");
  lp.decision_dim = lp.objective.size();
  lp.bound = j.contains("bound") && j["bound"].is_number()
                 ? std::optional<double>(j["bound"].get<double>())
                 : std::nullopt;
  lp.mixed_covariance = j.value("mixed_covariance", false);
  lp.rows = std::move(rows);
  lp.validate();
  return lp;
}

Json solution_to_json(const LPSolution& sol) {
  Json j;
  j["status"] = to_string(sol.status);
  j["objective_value"] = sol.objective_value;
  j["iterations"] = sol.iterations;
  j["theta"] = vector_to_json(sol.theta);
  return j;
}

LPSolution solution_from_json(const Json& j) {
  LPSolution sol;
  sol.status = lp_status_from_string(field(j, "status").get<std::string>());
  sol.objective_value = j.value("objective_value", 0.0);
  sol.iterations = j.value("iterations", std::size_t{0});
  sol.theta = vector_from_json(field(j, "theta"), "theta");
  return sol;
}

Json policy_to_json(const AffinePolicy& pol) {
  Json j;
  j["K"] = matrix_to_json(pol.K);
  j["k"] = vector_to_json(pol.k);
  return j;
}

AffinePolicy policy_from_json(const Json& j) {
  return {matrix_from_json(field(j, "K"), "K"),
          vector_from_json(field(j, "k"), "k")};
}

Json pe_report_to_json(const PEReport& r) {
  Json j;
  j["order_tested"] = r.order_tested;
  j["hankel_rank"] = r.hankel_rank;
  j["required_rank"] = r.required_rank;
  j["is_pe"] = r.is_pe;
  j["ones_in_rowspace"] = r.ones_in_rowspace;
  j["length_warning"] = r.length_warning;
  j["singular_values"] = vector_to_json(r.singular_values);
  return j;
}

Json rank_report_to_json(const RankReport& r) {
  Json j;
  j["rank"] = r.rank;
  j["required"] = r.required;
  j["full"] = r.full;
  j["singular_values"] = vector_to_json(r.singular_values);
  return j;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
  if (!out) throw FormatError("write failed for " + path.string());
}

Json read_json(const std::filesystem::path& path) {
  try {
    return Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const Json& j) {
  write_text(path, j.dump(2) + "\n");
}

}  // namespace affinelp
