#include "acdc/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace acdc::harness {

std::vector<double> RunMetrics::success_rates() const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.success_rate);
  return out;
}

double cumulative_regret(std::span<const double> success_rates) {
  if (success_rates.empty()) throw std::invalid_argument("cumulative_regret: empty curve");
  double total = 0.0;
  for (double s : success_rates) total += 1.0 - s;
  return total;
}

std::optional<int> time_to_threshold(std::span<const double> success_rates, double theta) {
  if (!(theta > 0.0 && theta <= 1.0)) throw std::invalid_argument("time_to_threshold: theta must lie in (0, 1]");
  for (std::size_t i = 0; i < success_rates.size(); ++i) {
    if (success_rates[i] >= theta) return static_cast<int>(i + 1);
  }
  return std::nullopt;
}

std::string format_ttt(std::optional<int> ttt) { return ttt ? std::to_string(*ttt) : "-"; }

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

std::string format_metrics_csv(const RunMetrics& metrics) {
  std::ostringstream os;
  os << kMetricsHeader << '\n';
  for (const auto& r : metrics.rows) {
    os << r.epoch << ',' << r.episodes_seen << ',' << format_number(r.success_rate) << ','
       << format_number(r.lambda) << ',' << format_number(r.eta) << ',' << format_number(r.mean_F)
       << ',' << format_number(r.mu_pos_norm) << ',' << format_number(r.mu_neg_norm) << ','
       << format_number(r.actor_loss) << ',' << format_number(r.critic_loss) << ','
       << format_number(r.encoder_loss) << '\n';
  }
  return os.str();
}

void write_metrics_csv(const std::filesystem::path& path, const RunMetrics& metrics) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << format_metrics_csv(metrics);
}

namespace {

double parse_cell(const std::string& cell) {
  if (cell == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw std::runtime_error("metrics.csv: bad number '" + cell + "'");
  }
  return v;
}

}  // namespace

RunMetrics read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw std::runtime_error(path.string() + ": unexpected metrics header");
  }
  RunMetrics m;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 11) throw std::runtime_error(path.string() + ": wrong column count");
    MetricsRow r;
    r.epoch = static_cast<int>(parse_cell(cells[0]));
    r.episodes_seen = static_cast<std::int64_t>(parse_cell(cells[1]));
    r.success_rate = parse_cell(cells[2]);
    r.lambda = parse_cell(cells[3]);
    r.eta = parse_cell(cells[4]);
    r.mean_F = parse_cell(cells[5]);
    r.mu_pos_norm = parse_cell(cells[6]);
    r.mu_neg_norm = parse_cell(cells[7]);
    r.actor_loss = parse_cell(cells[8]);
    r.critic_loss = parse_cell(cells[9]);
    r.encoder_loss = parse_cell(cells[10]);
    m.rows.push_back(r);
  }
  return m;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median: no values");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<RunSummary> summarize_runs(const std::filesystem::path& root, double theta) {
  namespace fs = std::filesystem;
  std::vector<fs::path> dirs;
  if (fs::exists(root / "metrics.csv")) dirs.push_back(root);
  if (fs::is_directory(root)) {
    for (const auto& entry : fs::directory_iterator(root)) {
      if (entry.is_directory() && fs::exists(entry.path() / "metrics.csv")) dirs.push_back(entry.path());
    }
  }
  std::sort(dirs.begin(), dirs.end());

  std::vector<RunSummary> out;
  for (const auto& dir : dirs) {
    const auto metrics = read_metrics_csv(dir / "metrics.csv");
    if (metrics.rows.empty()) continue;
    RunSummary s;
    s.dir = dir;
    s.mode = "?";
    std::ifstream mf(dir / "manifest.json");
    if (mf) {
      const auto manifest = nlohmann::json::parse(mf, nullptr, false);
      if (!manifest.is_discarded()) {
        s.mode = manifest.value("mode", std::string("?"));
        s.seed = manifest.value("seed", std::uint64_t{0});
      }
    }
    const auto rates = metrics.success_rates();
    s.epochs = static_cast<int>(rates.size());
    const std::size_t tail = std::min<std::size_t>(5, rates.size());
    double sum = 0.0;
    for (std::size_t i = rates.size() - tail; i < rates.size(); ++i) sum += rates[i];
    s.final_success = sum / static_cast<double>(tail);
    s.ttt = time_to_threshold(rates, theta);
    s.regret = cumulative_regret(rates);
    out.push_back(std::move(s));
  }
  return out;
}

std::string format_summary_table(const std::vector<RunSummary>& runs, double theta) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3);
  os << std::left << std::setw(28) << "run" << std::setw(20) << "mode" << std::setw(8) << "seed"
     << std::setw(8) << "epochs" << std::setw(10) << "final" << std::setw(10)
     << ("TTT(" + format_number(theta) + ")") << "regret\n";
  for (const auto& r : runs) {
    os << std::setw(28) << r.dir.filename().string() << std::setw(20) << r.mode << std::setw(8)
       << r.seed << std::setw(8) << r.epochs << std::setw(10) << r.final_success << std::setw(10)
       << format_ttt(r.ttt) << r.regret << '\n';
  }

  std::map<std::string, std::vector<const RunSummary*>> by_mode;
  for (const auto& r : runs) by_mode[r.mode].push_back(&r);
  struct ModeRow {
    std::string mode;
    std::size_t n;
    double final_success, ttt, regret;
  };
  std::vector<ModeRow> rows;
  for (const auto& [mode, list] : by_mode) {
    std::vector<double> fin, ttt, reg;
    for (const auto* r : list) {
      fin.push_back(r->final_success);
      ttt.push_back(r->ttt ? *r->ttt : std::numeric_limits<double>::infinity());
      reg.push_back(r->regret);
    }
    rows.push_back({mode, list.size(), median(fin), median(ttt), median(reg)});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const ModeRow& a, const ModeRow& b) { return a.regret < b.regret; });

  os << "\nmedians by mode (ordered by regret)\n";
  os << std::setw(20) << "mode" << std::setw(6) << "runs" << std::setw(10) << "final" << std::setw(10)
     << "TTT" << "regret\n";
  for (const auto& r : rows) {
    os << std::setw(20) << r.mode << std::setw(6) << r.n << std::setw(10) << r.final_success
       << std::setw(10) << (std::isinf(r.ttt) ? std::string("-") : format_number(r.ttt)) << r.regret
       << '\n';
  }
  return os.str();
}

}  // namespace acdc::harness
