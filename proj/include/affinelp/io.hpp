#pragma once

// JSON and CSV formats for systems, costs, datasets, constraint rows, LPs,
// solutions and reports. Numbers in CSV are printed with %.17g so files
// round-trip exactly and are byte-stable for a fixed seed.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "affinelp/excitation.hpp"
#include "affinelp/lp.hpp"

namespace affinelp {

using Json = nlohmann::ordered_json;

std::string format_double(double v);

Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j, const char* what);
Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& j, const char* what);

Json system_to_json(const AffineSystem& sys);
AffineSystem system_from_json(const Json& j);
Json cost_to_json(const StageCost& cost);
StageCost cost_from_json(const Json& j);

// One CSV line per column: x_*, u_*, xplus_* and omega_* when recorded.
void write_dataset_csv(const Dataset& ds, const std::filesystem::path& path);
// n, m, d, single_trajectory and the column layout.
Json dataset_header(const Dataset& ds);
// Widths come from the header line. Throws FormatError on malformed input.
Dataset read_dataset_csv(const std::filesystem::path& path,
                         bool single_trajectory);

// rho_0..rho_{p-1}, rhs, x_*, u_*, w_*, alpha_norm_sq (empty when unset).
void write_rows_csv(const std::vector<ConstraintRow>& rows, Eigen::Index n,
                    Eigen::Index m, const std::filesystem::path& path);
std::vector<ConstraintRow> read_rows_csv(const std::filesystem::path& path);

// Matrix stored column-per-line with headers prefix0, prefix1, ...
void write_matrix_csv(const Matrix& m, const std::string& prefix,
                      const std::filesystem::path& path);
Matrix read_matrix_csv(const std::filesystem::path& path);

Json lp_to_json(const LPProblem& lp);
// Rows come from the companion CSV.
LPProblem lp_from_json(const Json& j, std::vector<ConstraintRow> rows);

Json solution_to_json(const LPSolution& sol);
LPSolution solution_from_json(const Json& j);
Json policy_to_json(const AffinePolicy& pol);
AffinePolicy policy_from_json(const Json& j);
Json pe_report_to_json(const PEReport& r);
Json rank_report_to_json(const RankReport& r);

std::string read_text(const std::filesystem::path& path);
// Writes atomically enough for a single process: truncate then write.
void write_text(const std::filesystem::path& path, const std::string& text);
Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);

}  // namespace affinelp
