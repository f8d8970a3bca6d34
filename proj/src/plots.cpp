#include "ddsense/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace ddsense {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

const char* kColours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

}  // namespace

std::vector<PlotData> plot_data(const SweepResult& result, const PlotStyle& style) {
  if (result.points.empty()) throw std::invalid_argument("nothing to plot: sweep result is empty");
  const std::string x_label = result.variable == SweepVariable::TxPowerDbm ? "transmit power (dBm)" : "cos(theta)";

  PlotData taps{"taps_mse", "Delay/Doppler tap MSE", x_label, "MSE (taps^2)", style.log_mse, {}};
  taps.series = {{"los_delay", {}, {}}, {"los_doppler", {}, {}}, {"nlos_delay", {}, {}}, {"nlos_doppler", {}, {}}};
  PlotData pos{"position_rmse", "Target position RMSE", x_label, "RMSE (m)", false, {}};
  PlotData vel{"velocity_rmse", "Tx velocity RMSE", x_label, "RMSE (m/s)", false, {}};
  for (const char* m : kMethodNames) {
    pos.series.push_back({m, {}, {}});
    vel.series.push_back({m, {}, {}});
  }
  for (const auto& p : result.points) {
    if (p.skipped) continue;
    const double mse[4] = {p.mse_los_delay, p.mse_los_doppler, p.mse_nlos_delay, p.mse_nlos_doppler};
    for (int s = 0; s < 4; ++s) {
      taps.series[std::size_t(s)].x.push_back(p.value);
      taps.series[std::size_t(s)].y.push_back(mse[s]);
    }
    for (std::size_t k = 0; k < 3; ++k) {
      pos.series[k].x.push_back(p.value);
      pos.series[k].y.push_back(p.rmse_position[k]);
      vel.series[k].x.push_back(p.value);
      vel.series[k].y.push_back(p.rmse_velocity[k]);
    }
  }
  return {taps, pos, vel};
}

std::string render_svg(const PlotData& data, const PlotStyle& style) {
  const double W = style.width, H = style.height;
  const double left = 80, right = 150, top = 40, bottom = 60;
  const double pw = W - left - right, ph = H - top - bottom;

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : data.series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (data.log_y && !(s.y[i] > 0)) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 1, ymax = 10;
  if (xmax == xmin) xmin -= 1, xmax += 1;
  if (data.log_y) {
    ymin = std::pow(10.0, std::floor(std::log10(ymin)));
    ymax = std::pow(10.0, std::ceil(std::log10(ymax)));
    if (ymax <= ymin) ymax = ymin * 10;
  } else {
    ymin = std::min(0.0, ymin);
    if (ymax <= ymin) ymax = ymin + 1;
    ymax *= 1.05;
  }
  const auto X = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
  const auto Y = [&](double y) {
    const double t = data.log_y ? (std::log10(y) - std::log10(ymin)) / (std::log10(ymax) - std::log10(ymin))
                                : (y - ymin) / (ymax - ymin);
    return top + (1 - t) * ph;
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
      << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<metadata id=\"plot-data\">\n";
  svg << "title," << escape(data.title) << "\nx_label," << escape(data.x_label) << "\ny_label," << escape(data.y_label)
      << "\nlog_y," << (data.log_y ? 1 : 0) << '\n';
  for (const auto& s : data.series)
    for (std::size_t i = 0; i < s.x.size(); ++i) svg << "point," << s.name << ',' << fmt(s.x[i]) << ',' << fmt(s.y[i]) << '\n';
  svg << "</metadata>\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(data.title) << "</text>\n";
  svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";

  // x ticks at the data abscissae of the first series, else five even ticks
  std::vector<double> xt = data.series.empty() ? std::vector<double>{} : data.series.front().x;
  if (xt.empty() || xt.size() > 12) {
    xt.clear();
    for (int i = 0; i <= 4; ++i) xt.push_back(xmin + (xmax - xmin) * i / 4.0);
  }
  for (double x : xt) {
    svg << "<line x1=\"" << X(x) << "\" y1=\"" << top + ph << "\" x2=\"" << X(x) << "\" y2=\"" << top + ph + 5
        << "\" stroke=\"black\"/>";
    svg << "<text x=\"" << X(x) << "\" y=\"" << top + ph + 20 << "\" text-anchor=\"middle\">" << fmt(x) << "</text>\n";
  }
  std::vector<double> yt;
  if (data.log_y) {
    for (double y = ymin; y <= ymax * 1.0001; y *= 10) yt.push_back(y);
  } else {
    for (int i = 0; i <= 5; ++i) yt.push_back(ymin + (ymax - ymin) * i / 5.0);
  }
  for (double y : yt) {
    svg << "<line x1=\"" << left - 5 << "\" y1=\"" << Y(y) << "\" x2=\"" << left + pw << "\" y2=\"" << Y(y)
        << "\" stroke=\"#dddddd\"/>";
    char buf[32];
    std::snprintf(buf, sizeof buf, data.log_y ? "%.0e" : "%.3g", y);
    svg << "<text x=\"" << left - 8 << "\" y=\"" << Y(y) + 4 << "\" text-anchor=\"end\">" << buf << "</text>\n";
  }
  svg << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">" << escape(data.x_label)
      << "</text>\n";
  svg << "<text transform=\"translate(20," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(data.y_label) << "</text>\n";

  for (std::size_t si = 0; si < data.series.size(); ++si) {
    const auto& s = data.series[si];
    const char* colour = kColours[si % 4];
    std::ostringstream pts;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (data.log_y && !(s.y[i] > 0)) continue;
      pts << X(s.x[i]) << ',' << Y(s.y[i]) << ' ';
      svg << "<circle cx=\"" << X(s.x[i]) << "\" cy=\"" << Y(s.y[i]) << "\" r=\"3.5\" fill=\"" << colour << "\"/>";
    }
    svg << "\n<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.6\" points=\"" << pts.str() << "\"/>\n";
    const double ly = top + 14 + 18 * double(si);
    svg << "<line x1=\"" << left + pw + 12 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 36 << "\" y2=\"" << ly
        << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>";
    svg << "<text x=\"" << left + pw + 42 << "\" y=\"" << ly + 4 << "\">" << escape(s.name) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::vector<std::filesystem::path> emit_plots(const SweepResult& result, const std::filesystem::path& dir,
                                              const PlotStyle& style) {
  const auto charts = plot_data(result, style);
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> out;
  for (const auto& c : charts) {
    const auto path = dir / (c.file_stem + ".svg");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << render_svg(c, style);
    out.push_back(path);
  }
  return out;
}

PlotData read_plot_data(const std::filesystem::path& svg) {
  std::ifstream in(svg);
  if (!in) throw std::runtime_error("cannot open " + svg.string());
  PlotData data;
  data.file_stem = svg.stem().string();
  std::string line;
  bool inside = false;
  while (std::getline(in, line)) {
    if (line.rfind("<metadata", 0) == 0) {
      inside = true;
      continue;
    }
    if (line.rfind("</metadata>", 0) == 0) break;
    if (!inside) continue;
    const auto comma = line.find(',');
    const std::string key = line.substr(0, comma), rest = line.substr(comma + 1);
    if (key == "title") data.title = rest;
    else if (key == "x_label") data.x_label = rest;
    else if (key == "y_label") data.y_label = rest;
    else if (key == "log_y") data.log_y = rest == "1";
    else if (key == "point") {
      std::stringstream ss(rest);
      std::string name, x, y;
      std::getline(ss, name, ',');
      std::getline(ss, x, ',');
      std::getline(ss, y, ',');
      auto it = std::find_if(data.series.begin(), data.series.end(), [&](const PlotSeries& s) { return s.name == name; });
      if (it == data.series.end()) {
        data.series.push_back({name, {}, {}});
        it = data.series.end() - 1;
      }
      it->x.push_back(std::stod(x));
      it->y.push_back(std::stod(y));
    }
  }
  return data;
}

}  // namespace ddsense
