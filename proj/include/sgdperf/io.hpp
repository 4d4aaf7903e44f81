#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sgdperf/hwmodel.hpp"
#include "sgdperf/lawfit.hpp"
#include "sgdperf/planner.hpp"
#include "sgdperf/sgd_lab.hpp"

namespace sgdperf::io {

/// Shortest decimal text that round-trips the double ('.' radix).
std::string format_double(double value);

/// Writes to a sibling temporary file and renames it over `path`.
void atomic_write(const std::filesystem::path& path, const std::string& content);

/// A parsed CSV file: header fields plus data rows with their 1-based line numbers.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;
};

CsvTable read_csv(const std::filesystem::path& path);
std::string header_line(const std::filesystem::path& path);

inline constexpr const char* kRunsHeader = "M,seed,epsilon,n_update,converged,final_residual";
inline constexpr const char* kTimingsHeader = "M,P,t_update_seconds";
inline constexpr const char* kPlanHeader = "P,m_opt,t_conv_seconds,regime";
inline constexpr const char* kScalingHeader = "P,t_strong,t_weak,t_optimal";
inline constexpr const char* kBoundHeader = "k,residual_bound,gd_limit";
inline constexpr const char* kNBoundHeader = "M,n_lower_exact,n_lower_taylor";
inline constexpr const char* kLawsHeader = "epsilon,n_inf,alpha,r_squared";

std::string runs_csv(std::span<const RunRecord> records);
std::vector<RunRecord> read_runs(const std::filesystem::path& path);

std::string timings_csv(std::span<const Timing> timings);
std::vector<Timing> read_timings(const std::filesystem::path& path);

std::string plan_csv(std::span<const Pland> plans);
std::string scaling_csv(std::span<const ScalingRow<double>> rows);
std::string laws_csv(std::span<const LawParams> laws);

std::string law_json(const LawParams& law);
LawParams read_law(const std::filesystem::path& path);

std::string hw_json(const HardwareParamsd& hw);
HardwareParamsd read_hw(const std::filesystem::path& path);

std::string epsilon_law_json(const EpsilonLaw& law);

}  // namespace sgdperf::io
