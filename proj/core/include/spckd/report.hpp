#ifndef SPCKD_REPORT_HPP
#define SPCKD_REPORT_HPP

#include <string>
#include <vector>

#include "spckd/data.hpp"
#include "spckd/recovery.hpp"

namespace spckd {

struct MetricRecord {
  std::string id;
  std::string role;  // teacher | baseline | random-ca | kd-sparse | kd-nonsparse
  double gamma_t = 0.0;  // teacher compression ratio (0 when not distilled)
  double gamma_s = 0.0;  // this system's compression ratio
  double psnr_db = 0.0;
  double ssim_mean = 0.0;
  double seconds = 0.0;            // evaluation wall-clock time
  std::vector<double> stage_psnr;  // mean PSNR of x^k per stage
  std::size_t sample_count = 0;    // how many test samples were averaged
};

// Mean PSNR/SSIM of a system over a test set, plus the per-stage PSNR curve.
MetricRecord evaluate_system(SpcSystem<float>& system, const Dataset& test,
                             const std::string& id, const std::string& role,
                             double gamma_t, std::size_t batch_size = 32);

// metrics.csv with the fixed header id,role,gamma_t,gamma_s,psnr_db,ssim,
// seconds. Floating-point fields round-trip exactly.
void write_metrics_csv(const std::vector<MetricRecord>& records,
                       const std::string& path);
std::vector<MetricRecord> read_metrics_csv(const std::string& path);

// Per-stage PSNR sidecar (id,stage,psnr_db); merged back by record id.
void write_stage_psnr_csv(const std::vector<MetricRecord>& records,
                          const std::string& path);
void merge_stage_psnr_csv(const std::string& path,
                          std::vector<MetricRecord>& records);

// Writes metrics.csv, stage_psnr.csv, psnr_vs_gamma.svg (one series per
// role) and stage_psnr.svg into out_dir. Empty input is a usage error.
void emit_report(const std::vector<MetricRecord>& records,
                 const std::string& out_dir);

// Minimal SVG line chart: one polyline per series plus axes and a legend.
struct ChartSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;
};
void write_line_chart_svg(const std::string& path, const std::string& title,
                          const std::string& x_label,
                          const std::string& y_label,
                          const std::vector<ChartSeries>& series);

}  // namespace spckd

#endif  // SPCKD_REPORT_HPP
