#include "sgdperf/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace sgdperf::io {

namespace {

using nlohmann::json;

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

double parse_double(const std::string& text, const std::filesystem::path& path, std::size_t line) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || text.empty())
    throw InputError(where(path, line) + "malformed number '" + text + "'");
  return value;
}

std::uint64_t parse_unsigned(const std::string& text, const std::filesystem::path& path,
                             std::size_t line) {
  std::uint64_t value = 0;
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || text.empty())
    throw InputError(where(path, line) + "malformed integer '" + text + "'");
  return value;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

void expect_header(const CsvTable& t, const std::filesystem::path& path, const char* header) {
  if (split(header) != t.header)
    throw InputError(where(path, 1) + "expected header '" + header + "'");
}

void expect_width(const CsvTable& t, std::size_t row, const std::filesystem::path& path) {
  if (t.rows[row].size() != t.header.size())
    throw InputError(where(path, t.lines[row]) + "expected " + std::to_string(t.header.size()) +
                     " fields, got " + std::to_string(t.rows[row].size()));
}

json parse_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

template <typename T>
T field(const json& j, const char* key, const std::filesystem::path& path) {
  if (!j.contains(key)) throw InputError(path.string() + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": field '" + key + "': " + e.what());
  }
}

}  // namespace

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

void atomic_write(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw InputError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  CsvTable table;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (number == 1) {
      table.header = split(line);
      continue;
    }
    if (line.empty()) continue;
    table.rows.push_back(split(line));
    table.lines.push_back(number);
  }
  if (number == 0) throw InputError(path.string() + ": empty file");
  return table;
}

std::string header_line(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

std::string runs_csv(std::span<const RunRecord> records) {
  std::string out = std::string(kRunsHeader) + "\n";
  for (const auto& r : records) {
    out += std::to_string(r.minibatch) + "," + std::to_string(r.seed) + "," +
           format_double(r.epsilon) + "," + (r.n_update ? std::to_string(*r.n_update) : "") +
           "," + (r.converged() ? "1" : "0") + "," + format_double(r.final_residual) + "\n";
  }
  return out;
}

std::vector<RunRecord> read_runs(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  expect_header(t, path, kRunsHeader);
  std::vector<RunRecord> records;
  records.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    expect_width(t, i, path);
    const auto& f = t.rows[i];
    const std::size_t line = t.lines[i];
    RunRecord r;
    r.minibatch = parse_unsigned(f[0], path, line);
    if (r.minibatch == 0) throw InputError(where(path, line) + "M must be positive");
    r.seed = parse_unsigned(f[1], path, line);
    r.epsilon = parse_double(f[2], path, line);
    const std::uint64_t converged = parse_unsigned(f[4], path, line);
    if (converged > 1) throw InputError(where(path, line) + "converged must be 0 or 1");
    if (converged == 1) r.n_update = parse_unsigned(f[3], path, line);
    r.final_residual = parse_double(f[5], path, line);
    records.push_back(r);
  }
  return records;
}

std::string timings_csv(std::span<const Timing> timings) {
  std::string out = std::string(kTimingsHeader) + "\n";
  for (const auto& t : timings)
    out += format_double(t.minibatch) + "," + std::to_string(t.learners) + "," +
           format_double(t.seconds) + "\n";
  return out;
}

std::vector<Timing> read_timings(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  expect_header(t, path, kTimingsHeader);
  std::vector<Timing> timings;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    expect_width(t, i, path);
    const auto& f = t.rows[i];
    const std::size_t line = t.lines[i];
    Timing timing;
    timing.minibatch = parse_double(f[0], path, line);
    timing.learners = std::int64_t(parse_unsigned(f[1], path, line));
    timing.seconds = parse_double(f[2], path, line);
    timings.push_back(timing);
  }
  return timings;
}

std::string plan_csv(std::span<const Pland> plans) {
  std::string out = std::string(kPlanHeader) + "\n";
  for (const auto& p : plans)
    out += std::to_string(p.p) + "," + format_double(p.m_opt) + "," + format_double(p.t_conv) +
           "," + to_string(p.regime) + "\n";
  return out;
}

std::string scaling_csv(std::span<const ScalingRow<double>> rows) {
  std::string out = std::string(kScalingHeader) + "\n";
  for (const auto& r : rows)
    out += std::to_string(r.p) + "," + format_double(r.t_strong) + "," + format_double(r.t_weak) +
           "," + format_double(r.t_optimal) + "\n";
  return out;
}

std::string laws_csv(std::span<const LawParams> laws) {
  std::string out = std::string(kLawsHeader) + "\n";
  for (const auto& l : laws)
    out += format_double(l.epsilon) + "," + format_double(l.n_inf) + "," +
           format_double(l.alpha) + "," + format_double(l.r_squared) + "\n";
  return out;
}

std::string law_json(const LawParams& law) {
  json j;
  j["n_inf"] = law.n_inf;
  j["alpha"] = law.alpha;
  j["r_squared"] = law.r_squared;
  j["epsilon"] = law.epsilon;
  j["flags"] = law.flags;
  return j.dump(2) + "\n";
}

LawParams read_law(const std::filesystem::path& path) {
  const json j = parse_json(path);
  LawParams law;
  law.n_inf = field<double>(j, "n_inf", path);
  law.alpha = field<double>(j, "alpha", path);
  law.r_squared = j.contains("r_squared") ? field<double>(j, "r_squared", path) : 1.0;
  law.epsilon = j.contains("epsilon") ? field<double>(j, "epsilon", path) : 0.0;
  if (j.contains("flags")) law.flags = field<std::vector<std::string>>(j, "flags", path);
  return law;
}

std::string hw_json(const HardwareParamsd& hw) {
  json j;
  j["gamma"] = hw.gamma;
  j["m_t"] = hw.m_t;
  j["delta"] = hw.delta;
  j["comm_kind"] = to_string(hw.comm_kind);
  return j.dump(2) + "\n";
}

HardwareParamsd read_hw(const std::filesystem::path& path) {
  const json j = parse_json(path);
  HardwareParamsd hw;
  hw.gamma = field<double>(j, "gamma", path);
  hw.m_t = field<std::int64_t>(j, "m_t", path);
  hw.delta = field<double>(j, "delta", path);
  hw.comm_kind = parse_comm_kind(field<std::string>(j, "comm_kind", path));
  return hw;
}

std::string epsilon_law_json(const EpsilonLaw& law) {
  json j;
  j["c_ninf"] = law.c_ninf;
  j["c_alpha"] = law.c_alpha;
  j["slope_ninf"] = law.slope_ninf;
  j["slope_alpha"] = law.slope_alpha;
  j["epsilon_grid"] = law.epsilon_grid;
  json excluded = json::array();
  for (const auto& e : law.excluded) excluded.push_back({{"epsilon", e.epsilon}, {"reason", e.reason}});
  j["excluded"] = excluded;
  return j.dump(2) + "\n";
}

}  // namespace sgdperf::io
