#include "alignmap/svg.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <utility>

#include "alignmap/io_util.hpp"

namespace alignmap {

const char* region_color(Region r) {
  switch (r) {
    case Region::HighAvg: return "#0072b2";
    case Region::HighVar: return "#e69f00";
    case Region::LowAvg: return "#009e73";
    case Region::Unassigned: return "#999999";
  }
  return "#999999";
}

namespace {

constexpr Region kRegionOrder[] = {Region::HighAvg, Region::HighVar, Region::LowAvg,
                                   Region::Unassigned};

struct Range {
  double lo = 0.0;
  double hi = 1.0;
};

Range padded_range(double lo, double hi) {
  if (lo > hi) return {0.0, 1.0};
  double span = hi - lo;
  if (span <= 0.0) {
    const double pad = std::max(0.5, std::abs(lo) * 0.1);
    return {lo - pad, hi + pad};
  }
  return {lo - 0.05 * span, hi + 0.05 * span};
}

Range x_range(const DataMap& map) {
  double lo = map.points.front().variability, hi = lo;
  for (const auto& p : map.points) {
    lo = std::min(lo, p.variability);
    hi = std::max(hi, p.variability);
  }
  return padded_range(lo, hi);
}

Range y_range(const DataMap& map) {
  double lo = map.points.front().quality, hi = lo;
  for (const auto& p : map.points) {
    lo = std::min(lo, p.quality);
    hi = std::max(hi, p.quality);
  }
  return padded_range(lo, hi);
}

std::string num(double v) { return fmt_fixed(v, 2); }

std::string tick_label(double v) { return fmt_fixed(v, 3); }

std::string text_el(double x, double y, const std::string& s, const std::string& extra = "") {
  std::string attrs = "font-family=\"sans-serif\" fill=\"#333\"";
  if (extra.find("font-size") == std::string::npos) attrs += " font-size=\"12\"";
  if (!extra.empty()) attrs += " " + extra;
  return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" " + attrs + ">" + s + "</text>\n";
}

std::string line_el(double x1, double y1, double x2, double y2) {
  return "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" +
         num(y2) + "\" stroke=\"#333\" stroke-width=\"1\"/>\n";
}

std::vector<Region> present_regions(const DataMap& map) {
  std::vector<Region> present;
  for (Region r : kRegionOrder) {
    if (std::any_of(map.points.begin(), map.points.end(),
                    [&](const MapPoint& p) { return p.region == r; })) {
      present.push_back(r);
    }
  }
  return present;
}

std::size_t region_count(const DataMap& map, Region r) {
  return static_cast<std::size_t>(std::count_if(
      map.points.begin(), map.points.end(), [&](const MapPoint& p) { return p.region == r; }));
}

/// Axial rounding for pointy-top hexagons (cube-coordinate rounding), so
/// every pixel belongs to exactly one hexagon.
std::pair<int, int> axial_round(double q, double r) {
  const double x = q, z = r, y = -x - z;
  double rx = std::round(x), ry = std::round(y), rz = std::round(z);
  const double dx = std::abs(rx - x), dy = std::abs(ry - y), dz = std::abs(rz - z);
  if (dx > dy && dx > dz) {
    rx = -ry - rz;
  } else if (dy > dz) {
    ry = -rx - rz;
  } else {
    rz = -rx - ry;
  }
  return {static_cast<int>(rx), static_cast<int>(rz)};
}

std::string hexagon_points(double cx, double cy, double size) {
  std::string pts;
  for (int i = 0; i < 6; ++i) {
    const double angle = (60.0 * i - 30.0) * std::numbers::pi / 180.0;
    if (i) pts += ' ';
    pts += num(cx + size * std::cos(angle)) + "," + num(cy + size * std::sin(angle));
  }
  return pts;
}

}  // namespace

std::string render_scatter_svg(const DataMap& map) {
  constexpr double kW = 800, kH = 560;
  constexpr double kLeft = 70, kRight = 780, kTop = 50, kBottom = 500;
  const Range xr = x_range(map);
  const Range yr = y_range(map);
  const auto sx = [&](double v) {
    return kLeft + (v - xr.lo) / (xr.hi - xr.lo) * (kRight - kLeft);
  };
  const auto sy = [&](double v) {
    return kBottom - (v - yr.lo) / (yr.hi - yr.lo) * (kBottom - kTop);
  };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"560\" "
         "viewBox=\"0 0 800 560\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"800\" height=\"560\" fill=\"#ffffff\"/>\n";
  svg += text_el(kW / 2, 28, "Preference data map",
                 "text-anchor=\"middle\" font-size=\"16\" font-weight=\"bold\"");

  // axes with 5 ticks each
  svg += line_el(kLeft, kBottom, kRight, kBottom);
  svg += line_el(kLeft, kBottom, kLeft, kTop);
  for (int i = 0; i <= 4; ++i) {
    const double xv = xr.lo + (xr.hi - xr.lo) * i / 4.0;
    const double yv = yr.lo + (yr.hi - yr.lo) * i / 4.0;
    svg += line_el(sx(xv), kBottom, sx(xv), kBottom + 5);
    svg += text_el(sx(xv), kBottom + 20, tick_label(xv), "text-anchor=\"middle\"");
    svg += line_el(kLeft - 5, sy(yv), kLeft, sy(yv));
    svg += text_el(kLeft - 8, sy(yv) + 4, tick_label(yv), "text-anchor=\"end\"");
  }
  svg += text_el((kLeft + kRight) / 2, kH - 14, "variability", "text-anchor=\"middle\"");
  svg += "<text x=\"18\" y=\"" + num((kTop + kBottom) / 2) +
         "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#333\" "
         "text-anchor=\"middle\" transform=\"rotate(-90 18 " + num((kTop + kBottom) / 2) +
         ")\">quality</text>\n";

  for (const auto& p : map.points) {
    svg += "<circle cx=\"" + num(sx(p.variability)) + "\" cy=\"" + num(sy(p.quality)) +
           "\" r=\"3\" fill=\"" + region_color(p.region) +
           "\" fill-opacity=\"0.75\" data-region=\"" + to_string(p.region) + "\"/>\n";
  }

  // legend: only regions that actually occur
  double ly = kTop + 10;
  for (Region r : present_regions(map)) {
    svg += "<g class=\"legend-entry\" data-region=\"" + to_string(r) + "\">\n";
    svg += "<rect x=\"" + num(kRight - 150) + "\" y=\"" + num(ly) +
           "\" width=\"12\" height=\"12\" fill=\"" + std::string(region_color(r)) + "\"/>\n";
    svg += text_el(kRight - 132, ly + 10,
                   to_string(r) + " (" + std::to_string(region_count(map, r)) + ")");
    svg += "</g>\n";
    ly += 20;
  }
  svg += "</svg>\n";
  return svg;
}

std::string render_hexbin_svg(const DataMap& map) {
  constexpr double kPanelW = 350, kPanelH = 380, kGap = 40, kLeft = 50, kTop = 70;
  constexpr double kHexSize = 10.0;
  constexpr Region kPanels[] = {Region::HighVar, Region::HighAvg, Region::LowAvg};
  const double width = kLeft + 3 * kPanelW + 2 * kGap + 30;
  const double height = kTop + kPanelH + 60;
  const Range xr = x_range(map);   // shared across panels so densities compare
  const Range yr = y_range(map);
  constexpr double kSqrt3 = std::numbers::sqrt3;

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" +
         num(height) + "\" viewBox=\"0 0 " + num(width) + " " + num(height) + "\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"" + num(width) + "\" height=\"" + num(height) +
         "\" fill=\"#ffffff\"/>\n";
  svg += text_el(width / 2, 28, "Preference data map - hexbin density by region",
                 "text-anchor=\"middle\" font-size=\"16\" font-weight=\"bold\"");

  for (int panel = 0; panel < 3; ++panel) {
    const Region region = kPanels[panel];
    const double px0 = kLeft + panel * (kPanelW + kGap);
    const double py0 = kTop;

    std::map<std::pair<int, int>, std::size_t> bins;
    for (const auto& p : map.points) {
      if (p.region != region) continue;
      const double x = (p.variability - xr.lo) / (xr.hi - xr.lo) * kPanelW;
      const double y = kPanelH - (p.quality - yr.lo) / (yr.hi - yr.lo) * kPanelH;
      const double q = (kSqrt3 / 3.0 * x - y / 3.0) / kHexSize;
      const double r = (2.0 / 3.0 * y) / kHexSize;
      ++bins[axial_round(q, r)];
    }
    std::size_t max_count = 0;
    std::size_t total = 0;
    for (const auto& [key, count] : bins) {
      max_count = std::max(max_count, count);
      total += count;
    }

    svg += "<g data-panel=\"" + to_string(region) + "\">\n";
    svg += "<rect x=\"" + num(px0) + "\" y=\"" + num(py0) + "\" width=\"" + num(kPanelW) +
           "\" height=\"" + num(kPanelH) +
           "\" fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n";
    svg += text_el(px0 + kPanelW / 2, py0 - 12,
                   to_string(region) + " (" + std::to_string(total) + ")",
                   "text-anchor=\"middle\" font-weight=\"bold\"");
    for (const auto& [key, count] : bins) {
      const double cx = px0 + kHexSize * kSqrt3 * (key.first + key.second / 2.0);
      const double cy = py0 + kHexSize * 1.5 * key.second;
      const double opacity =
          0.25 + 0.75 * static_cast<double>(count) / static_cast<double>(max_count);
      svg += "<polygon points=\"" + hexagon_points(cx, cy, kHexSize) + "\" fill=\"" +
             region_color(region) + "\" fill-opacity=\"" + fmt_fixed(opacity, 3) +
             "\" data-count=\"" + std::to_string(count) + "\" data-region=\"" +
             to_string(region) + "\"/>\n";
    }
    // shared-range reference labels on the panel frame
    svg += text_el(px0, py0 + kPanelH + 18, tick_label(xr.lo));
    svg += text_el(px0 + kPanelW, py0 + kPanelH + 18, tick_label(xr.hi), "text-anchor=\"end\"");
    svg += "</g>\n";
  }
  svg += text_el(kLeft + (3 * kPanelW + 2 * kGap) / 2, height - 14, "variability",
                 "text-anchor=\"middle\"");
  svg += "</svg>\n";
  return svg;
}

}  // namespace alignmap
