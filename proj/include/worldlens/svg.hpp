#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "worldlens/worldio.hpp"

namespace worldlens {

/// Self-contained log-log scatter/line plot with reference-slope guide lines.
/// Good enough for error-vs-n convergence pictures; no plotting dependency.
class LogLogPlot {
public:
    LogLogPlot(std::string title, std::string x_label, std::string y_label)
        : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

    void add_series(std::string name, std::vector<std::pair<double, double>> points,
                    std::string color) {
        series_.push_back({std::move(name), std::move(points), std::move(color)});
    }

    /// Guide line with the given slope in log-log space, anchored at the
    /// series' leftmost point region.
    void add_reference_slope(double slope, std::string color) {
        reference_.push_back({slope, std::move(color)});
    }

    void render(std::ostream& out) const {
        double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
        for (const auto& s : series_)
            for (auto [x, y] : s.points) {
                if (x <= 0 || y <= 0) continue;
                xmin = std::min(xmin, x);
                xmax = std::max(xmax, x);
                ymin = std::min(ymin, y);
                ymax = std::max(ymax, y);
            }
        if (xmin > xmax) {
            xmin = 1;
            xmax = 10;
            ymin = 0.1;
            ymax = 1;
        }
        if (ymin == ymax) ymin = ymax / 10;
        const double lx0 = std::log10(xmin), lx1 = std::log10(xmax);
        const double ly0 = std::log10(ymin) - 0.1, ly1 = std::log10(ymax) + 0.1;

        auto px = [&](double x) {
            return kMarginL + (std::log10(x) - lx0) / std::max(lx1 - lx0, 1e-9) * kPlotW;
        };
        auto py = [&](double y) {
            return kMarginT + kPlotH - (std::log10(y) - ly0) / std::max(ly1 - ly0, 1e-9) * kPlotH;
        };

        out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\""
            << kH << "\" viewBox=\"0 0 " << kW << " " << kH << "\">\n";
        out << "<rect width=\"" << kW << "\" height=\"" << kH << "\" fill=\"white\"/>\n";
        out << "<text x=\"" << kW / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">"
            << title_ << "</text>\n";

        // axes
        out << "<rect x=\"" << kMarginL << "\" y=\"" << kMarginT << "\" width=\"" << kPlotW
            << "\" height=\"" << kPlotH << "\" fill=\"none\" stroke=\"black\"/>\n";
        out << "<text x=\"" << kMarginL + kPlotW / 2 << "\" y=\"" << kH - 8
            << "\" text-anchor=\"middle\" font-size=\"12\">" << x_label_ << "</text>\n";
        out << "<text x=\"14\" y=\"" << kMarginT + kPlotH / 2
            << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 "
            << kMarginT + kPlotH / 2 << ")\">" << y_label_ << "</text>\n";

        // decade ticks
        for (int d = static_cast<int>(std::floor(lx0)); d <= static_cast<int>(std::ceil(lx1));
             ++d) {
            double x = std::pow(10.0, d);
            if (x < xmin * 0.999 || x > xmax * 1.001) continue;
            out << "<line x1=\"" << px(x) << "\" y1=\"" << kMarginT + kPlotH << "\" x2=\""
                << px(x) << "\" y2=\"" << kMarginT << "\" stroke=\"#dddddd\"/>\n";
            out << "<text x=\"" << px(x) << "\" y=\"" << kMarginT + kPlotH + 16
                << "\" text-anchor=\"middle\" font-size=\"10\">1e" << d << "</text>\n";
        }
        for (int d = static_cast<int>(std::floor(ly0)); d <= static_cast<int>(std::ceil(ly1));
             ++d) {
            double y = std::pow(10.0, d);
            if (std::log10(y) < ly0 || std::log10(y) > ly1) continue;
            out << "<line x1=\"" << kMarginL << "\" y1=\"" << py(y) << "\" x2=\""
                << kMarginL + kPlotW << "\" y2=\"" << py(y) << "\" stroke=\"#dddddd\"/>\n";
            out << "<text x=\"" << kMarginL - 6 << "\" y=\"" << py(y) + 3
                << "\" text-anchor=\"end\" font-size=\"10\">1e" << d << "</text>\n";
        }

        // reference slopes anchored at the first series' first point
        if (!series_.empty() && !series_[0].points.empty()) {
            auto [ax, ay] = series_[0].points.front();
            for (const auto& ref : reference_) {
                double y_end = ay * std::pow(xmax / ax, ref.slope);
                out << "<line x1=\"" << px(ax) << "\" y1=\"" << py(ay) << "\" x2=\"" << px(xmax)
                    << "\" y2=\"" << py(y_end) << "\" stroke=\"" << ref.color
                    << "\" stroke-dasharray=\"6,4\"/>\n";
                out << "<text x=\"" << px(xmax) - 4 << "\" y=\"" << py(y_end) - 4
                    << "\" text-anchor=\"end\" font-size=\"10\" fill=\"" << ref.color
                    << "\">slope " << detail::format_double(ref.slope) << "</text>\n";
            }
        }

        int legend_y = kMarginT + 14;
        for (const auto& s : series_) {
            std::string path;
            for (std::size_t i = 0; i < s.points.size(); ++i) {
                auto [x, y] = s.points[i];
                if (x <= 0 || y <= 0) continue;
                path += (path.empty() ? "M" : "L");
                path += std::to_string(px(x)) + " " + std::to_string(py(y));
            }
            out << "<path d=\"" << path << "\" fill=\"none\" stroke=\"" << s.color
                << "\" stroke-width=\"1.5\"/>\n";
            for (auto [x, y] : s.points) {
                if (x <= 0 || y <= 0) continue;
                out << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y)
                    << "\" r=\"3\" fill=\"" << s.color << "\"/>\n";
            }
            out << "<rect x=\"" << kMarginL + kPlotW - 150 << "\" y=\"" << legend_y - 8
                << "\" width=\"10\" height=\"10\" fill=\"" << s.color << "\"/>\n";
            out << "<text x=\"" << kMarginL + kPlotW - 136 << "\" y=\"" << legend_y + 1
                << "\" font-size=\"11\">" << s.name << "</text>\n";
            legend_y += 16;
        }
        out << "</svg>\n";
    }

private:
    struct Series {
        std::string name;
        std::vector<std::pair<double, double>> points;
        std::string color;
    };
    struct Reference {
        double slope;
        std::string color;
    };

    static constexpr int kW = 640, kH = 480;
    static constexpr int kMarginL = 60, kMarginT = 40;
    static constexpr int kPlotW = kW - kMarginL - 30, kPlotH = kH - kMarginT - 50;

    std::string title_, x_label_, y_label_;
    std::vector<Series> series_;
    std::vector<Reference> reference_;
};

} // namespace worldlens
