#include "spckd/report.hpp"

#include <algorithm>
#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "spckd/metrics.hpp"

namespace spckd {
namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

MetricRecord evaluate_system(SpcSystem<float>& system, const Dataset& test,
                             const std::string& id, const std::string& role,
                             double gamma_t, std::size_t batch_size) {
  if (test.empty()) throw ConfigError("evaluate_system: empty test set");
  MetricRecord rec;
  rec.id = id;
  rec.role = role;
  rec.gamma_t = gamma_t;
  rec.gamma_s = system.bank.shape.gamma;
  rec.sample_count = test.size();

  const SensingShape& shape = system.bank.shape;
  const std::size_t scene = shape.scene_size();
  const Shape image_shape{shape.bands, shape.image_rows, shape.image_cols};
  std::vector<std::size_t> order(test.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  const auto wall_start = std::chrono::steady_clock::now();
  double psnr_sum = 0.0, ssim_sum = 0.0;
  std::vector<double> stage_sum;
  for (std::size_t first = 0; first < test.size(); first += batch_size) {
    const std::size_t count = std::min(batch_size, test.size() - first);
    Tensor<float> scenes = test.batch(order, first, count);
    TraceValues<float> trace = system.run(scenes);
    if (stage_sum.empty()) stage_sum.assign(trace.x_stages.size(), 0.0);
    for (std::size_t b = 0; b < count; ++b) {
      Tensor<float> want(image_shape,
                         std::vector<float>(scenes.data() + b * scene,
                                            scenes.data() + (b + 1) * scene));
      Tensor<float> got(image_shape,
                        std::vector<float>(
                            trace.x_stages.back().data() + b * scene,
                            trace.x_stages.back().data() + (b + 1) * scene));
      psnr_sum += psnr(got, want);
      ssim_sum += ssim(got, want);
      for (std::size_t k = 0; k < trace.x_stages.size(); ++k) {
        Tensor<float> xk(image_shape,
                         std::vector<float>(
                             trace.x_stages[k].data() + b * scene,
                             trace.x_stages[k].data() + (b + 1) * scene));
        stage_sum[k] += psnr(xk, want);
      }
    }
  }
  const auto wall_end = std::chrono::steady_clock::now();
  rec.seconds = std::chrono::duration<double>(wall_end - wall_start).count();
  rec.psnr_db = psnr_sum / static_cast<double>(test.size());
  rec.ssim_mean = ssim_sum / static_cast<double>(test.size());
  for (double s : stage_sum)
    rec.stage_psnr.push_back(s / static_cast<double>(test.size()));
  return rec;
}

void write_metrics_csv(const std::vector<MetricRecord>& records,
                       const std::string& path) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot write '" + path + "'");
  os << "id,role,gamma_t,gamma_s,psnr_db,ssim,seconds\n";
  for (const MetricRecord& r : records)
    os << r.id << "," << r.role << "," << fmt_double(r.gamma_t) << ","
       << fmt_double(r.gamma_s) << "," << fmt_double(r.psnr_db) << ","
       << fmt_double(r.ssim_mean) << "," << fmt_double(r.seconds) << "\n";
}

std::vector<MetricRecord> read_metrics_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(is, line) ||
      line != "id,role,gamma_t,gamma_s,psnr_db,ssim,seconds")
    throw FormatError("'" + path + "' is not a metrics CSV (bad header)");
  std::vector<MetricRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 7)
      throw FormatError("'" + path + "': expected 7 fields, got " +
                        std::to_string(f.size()));
    MetricRecord r;
    r.id = f[0];
    r.role = f[1];
    r.gamma_t = std::stod(f[2]);
    r.gamma_s = std::stod(f[3]);
    r.psnr_db = std::stod(f[4]);
    r.ssim_mean = std::stod(f[5]);
    r.seconds = std::stod(f[6]);
    out.push_back(std::move(r));
  }
  return out;
}

void write_stage_psnr_csv(const std::vector<MetricRecord>& records,
                          const std::string& path) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot write '" + path + "'");
  os << "id,stage,psnr_db\n";
  for (const MetricRecord& r : records)
    for (std::size_t k = 0; k < r.stage_psnr.size(); ++k)
      os << r.id << "," << (k + 1) << "," << fmt_double(r.stage_psnr[k])
         << "\n";
}

void merge_stage_psnr_csv(const std::string& path,
                          std::vector<MetricRecord>& records) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(is, line) || line != "id,stage,psnr_db")
    throw FormatError("'" + path + "' is not a stage PSNR CSV");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 3)
      throw FormatError("'" + path + "': expected 3 fields");
    for (MetricRecord& r : records) {
      if (r.id != f[0]) continue;
      const std::size_t stage = std::stoul(f[1]);
      if (r.stage_psnr.size() < stage) r.stage_psnr.resize(stage, 0.0);
      r.stage_psnr[stage - 1] = std::stod(f[2]);
    }
  }
}

// ----------------------------------------------------------------- charts

void write_line_chart_svg(const std::string& path, const std::string& title,
                          const std::string& x_label,
                          const std::string& y_label,
                          const std::vector<ChartSeries>& series) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
  const double width = 640, height = 420;
  const double ml = 64, mr = 160, mt = 40, mb = 48;
  const double pw = width - ml - mr, ph = height - mt - mb;

  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const ChartSeries& s : series)
    for (const auto& [x, y] : s.points) {
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  if (x0 > x1) {
    x0 = 0;
    x1 = 1;
  }
  if (x0 == x1) {
    x0 -= 0.5;
    x1 += 0.5;
  }
  if (y0 > y1) {
    y0 = 0;
    y1 = 1;
  }
  if (y0 == y1) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const double ypad = 0.05 * (y1 - y0);
  y0 -= ypad;
  y1 += ypad;

  auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return mt + ph - (y - y0) / (y1 - y0) * ph; };

  std::ofstream os(path);
  if (!os) throw FormatError("cannot write '" + path + "'");
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
     << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " "
     << height << "\">\n";
  os << "<rect width=\"" << width << "\" height=\"" << height
     << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << ml << "\" y=\"24\" font-family=\"sans-serif\" "
     << "font-size=\"15\" font-weight=\"bold\">" << title << "</text>\n";

  // axes + ticks
  os << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw
     << "\" y2=\"" << mt + ph << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
     << "\" y2=\"" << mt + ph << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double fx = x0 + (x1 - x0) * t / 4.0;
    const double fy = y0 + (y1 - y0) * t / 4.0;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", fx);
    os << "<text x=\"" << px(fx) << "\" y=\"" << mt + ph + 18
       << "\" font-family=\"sans-serif\" font-size=\"11\" "
       << "text-anchor=\"middle\">" << buf << "</text>\n";
    std::snprintf(buf, sizeof(buf), "%.4g", fy);
    os << "<text x=\"" << ml - 6 << "\" y=\"" << py(fy) + 4
       << "\" font-family=\"sans-serif\" font-size=\"11\" "
       << "text-anchor=\"end\">" << buf << "</text>\n";
    os << "<line x1=\"" << ml << "\" y1=\"" << py(fy) << "\" x2=\"" << ml + pw
       << "\" y2=\"" << py(fy) << "\" stroke=\"#dddddd\"/>\n";
  }
  os << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 10
     << "\" font-family=\"sans-serif\" font-size=\"13\" "
     << "text-anchor=\"middle\">" << x_label << "</text>\n";
  os << "<text x=\"16\" y=\"" << mt + ph / 2
     << "\" font-family=\"sans-serif\" font-size=\"13\" "
     << "transform=\"rotate(-90 16 " << mt + ph / 2 << ")\" "
     << "text-anchor=\"middle\">" << y_label << "</text>\n";

  std::size_t color = 0;
  for (const ChartSeries& s : series) {
    const char* stroke = palette[color % 8];
    std::vector<std::pair<double, double>> pts = s.points;
    std::sort(pts.begin(), pts.end());
    os << "<polyline fill=\"none\" stroke=\"" << stroke
       << "\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : pts) os << px(x) << "," << py(y) << " ";
    os << "\"/>\n";
    for (const auto& [x, y] : pts)
      os << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y)
         << "\" r=\"3\" fill=\"" << stroke << "\"/>\n";
    os << "<text x=\"" << ml + pw + 12 << "\" y=\"" << mt + 16 + 18 * color
       << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" << stroke
       << "\">" << s.label << "</text>\n";
    ++color;
  }
  os << "</svg>\n";
}

void emit_report(const std::vector<MetricRecord>& records,
                 const std::string& out_dir) {
  if (records.empty()) throw UsageError("emit_report: no records");
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  write_metrics_csv(records, (dir / "metrics.csv").string());
  write_stage_psnr_csv(records, (dir / "stage_psnr.csv").string());

  std::map<std::string, ChartSeries> by_role;
  for (const MetricRecord& r : records) {
    ChartSeries& s = by_role[r.role];
    s.label = r.role;
    s.points.emplace_back(r.gamma_s, r.psnr_db);
  }
  std::vector<ChartSeries> gamma_series;
  for (auto& [role, s] : by_role) gamma_series.push_back(s);
  write_line_chart_svg((dir / "psnr_vs_gamma.svg").string(),
                       "Reconstruction quality vs compression ratio",
                       "compression ratio", "PSNR (dB)", gamma_series);

  std::vector<ChartSeries> stage_series;
  for (const MetricRecord& r : records) {
    if (r.stage_psnr.empty()) continue;
    ChartSeries s;
    s.label = r.id;
    for (std::size_t k = 0; k < r.stage_psnr.size(); ++k)
      s.points.emplace_back(static_cast<double>(k + 1), r.stage_psnr[k]);
    stage_series.push_back(std::move(s));
  }
  write_line_chart_svg((dir / "stage_psnr.svg").string(),
                       "Recovery quality along the unrolled stages", "stage",
                       "PSNR (dB)", stage_series);
}

}  // namespace spckd
