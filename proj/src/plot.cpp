#include "diver/plot.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace diver {
namespace {

constexpr double kPxPerMeter = 10.0;

const char* kModeColors[8] = {"#e41a1c", "#377eb8", "#4daf4a", "#984ea3",
                              "#ff7f00", "#a65628", "#f781bf", "#999999"};

struct Frame {
  double min_x, max_y;
  double px(double x) const { return (x - min_x) * kPxPerMeter; }
  double py(double y) const { return (max_y - y) * kPxPerMeter; }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

void polyline_path(std::ostringstream& svg, const Frame& f,
                   const std::vector<Waypoint>& pts, const std::string& style,
                   bool from_origin) {
  if (pts.empty()) return;
  svg << "<path d=\"M " << num(f.px(from_origin ? 0.0 : pts[0].x)) << " "
      << num(f.py(from_origin ? 0.0 : pts[0].y));
  for (size_t i = from_origin ? 0 : 1; i < pts.size(); ++i)
    svg << " L " << num(f.px(pts[i].x)) << " " << num(f.py(pts[i].y));
  svg << "\" fill=\"none\" " << style << "/>\n";
}

// Threshold crossings cell by cell; cells with four crossings pair edges by
// their order around the cell, which is adequate for a diagnostic picture.
void contour_segments(std::ostringstream& svg, const Frame& f,
                      const SafetyField& field, double thresh) {
  if (field.rows < 2 || field.cols < 2) return;
  std::ostringstream d;
  for (size_t r = 0; r + 1 < field.rows; ++r) {
    for (size_t c = 0; c + 1 < field.cols; ++c) {
      double x0 = field.origin.x + double(c) * field.cell;
      double y0 = field.origin.y + double(r) * field.cell;
      double x1 = x0 + field.cell, y1 = y0 + field.cell;
      double v00 = field.at(r, c), v10 = field.at(r, c + 1);
      double v01 = field.at(r + 1, c), v11 = field.at(r + 1, c + 1);
      struct Pt { double x, y; };
      Pt hits[4];
      int n = 0;
      auto edge = [&](double va, double vb, double ax, double ay, double bx, double by) {
        if ((va < thresh) == (vb < thresh)) return;
        double t = (thresh - va) / (vb - va);
        hits[n++] = {ax + t * (bx - ax), ay + t * (by - ay)};
      };
      edge(v00, v10, x0, y0, x1, y0);
      edge(v10, v11, x1, y0, x1, y1);
      edge(v11, v01, x1, y1, x0, y1);
      edge(v01, v00, x0, y1, x0, y0);
      for (int i = 0; i + 1 < n; i += 2) {
        d << "M " << num(f.px(hits[i].x)) << " " << num(f.py(hits[i].y)) << " L "
          << num(f.px(hits[i + 1].x)) << " " << num(f.py(hits[i + 1].y)) << " ";
      }
    }
  }
  std::string path = d.str();
  if (!path.empty())
    svg << "<path d=\"" << path
        << "\" fill=\"none\" stroke=\"#d73027\" stroke-width=\"1\" "
           "stroke-dasharray=\"4 3\"/>\n";
}

}  // namespace

std::string render_scene_svg(const Scene& scene,
                             const std::vector<Trajectory>& modes,
                             double d_thresh) {
  const SafetyField& fld = scene.safety_field;
  double min_x = fld.origin.x - fld.cell / 2.0;
  double max_x = fld.origin.x + (double(fld.cols) - 0.5) * fld.cell;
  double min_y = fld.origin.y - fld.cell / 2.0;
  double max_y = fld.origin.y + (double(fld.rows) - 0.5) * fld.cell;
  Frame f{min_x, max_y};
  double width = (max_x - min_x) * kPxPerMeter;
  double height = (max_y - min_y) * kPxPerMeter;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width)
      << "\" height=\"" << num(height) << "\" viewBox=\"0 0 " << num(width)
      << " " << num(height) << "\">\n";
  svg << "<title>" << xml_escape(scene.scene_id) << "</title>\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"#fbfbf8\"/>\n";

  size_t n_lines = scene.map_polylines.size();
  for (size_t i = 0; i < n_lines; ++i) {
    bool boundary = n_lines >= 2 && i >= n_lines - 2;
    polyline_path(svg, f, scene.map_polylines[i],
                  boundary ? "stroke=\"#666666\" stroke-width=\"2\""
                           : "stroke=\"#bbbbbb\" stroke-width=\"1.5\" "
                             "stroke-dasharray=\"8 6\"",
                  false);
  }

  contour_segments(svg, f, fld, d_thresh);

  for (const AgentState& a : scene.agents) {
    svg << "<circle cx=\"" << num(f.px(a.position.x)) << "\" cy=\""
        << num(f.py(a.position.y)) << "\" r=\"" << num(a.radius * kPxPerMeter)
        << "\" fill=\"#fdae61\" stroke=\"#e08214\"/>\n";
    svg << "<line x1=\"" << num(f.px(a.position.x)) << "\" y1=\""
        << num(f.py(a.position.y)) << "\" x2=\"" << num(f.px(a.position.x + a.vx))
        << "\" y2=\"" << num(f.py(a.position.y + a.vy))
        << "\" stroke=\"#e08214\" stroke-width=\"1.5\"/>\n";
  }

  for (const Trajectory& ref : scene.reference_gts)
    polyline_path(svg, f, ref.points,
                  "stroke=\"#74add1\" stroke-width=\"1\" stroke-dasharray=\"3 3\"",
                  true);

  polyline_path(svg, f, scene.gt.points,
                "stroke=\"#111111\" stroke-width=\"2.5\"", true);

  for (size_t m = 0; m < modes.size(); ++m) {
    std::string style = "stroke=\"" + std::string(kModeColors[m % 8]) +
                        "\" stroke-width=\"1.8\"";
    polyline_path(svg, f, modes[m].points, style, true);
    if (!modes[m].points.empty()) {
      const Waypoint& last = modes[m].points.back();
      svg << "<circle cx=\"" << num(f.px(last.x)) << "\" cy=\""
          << num(f.py(last.y)) << "\" r=\"3\" fill=\"" << kModeColors[m % 8]
          << "\"/>\n";
    }
  }

  svg << "<circle cx=\"" << num(f.px(0)) << "\" cy=\"" << num(f.py(0))
      << "\" r=\"4\" fill=\"#111111\"/>\n";
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace diver
