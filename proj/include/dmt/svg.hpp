#ifndef DMT_SVG_HPP
#define DMT_SVG_HPP

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "common.hpp"
#include "dataset.hpp"
#include "matrix.hpp"

namespace dmt {

/// Discrete 10-colour palette (tab10); labels wrap modulo 10.
inline const char* scatter_color(int label) {
    static const char* palette[10] = {
        "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
        "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
    };
    return palette[((label % 10) + 10) % 10];
}

/**
 * Renders a 2-D point set as an SVG scatter: one circle per point, axes
 * fitted to the data bounding box with a 5% margin, and a label legend when
 * labels are present. Output bytes are a pure function of the input.
 */
inline std::string scatter_svg(const Matrix& points, const std::vector<int>* labels) {
    if (points.cols != 2) throw DataError("scatter_svg: embedding must be 2-D");
    if (labels && labels->size() != points.rows) {
        throw DataError("scatter_svg: label count mismatch");
    }
    const double size = 800.0;
    double min_x = 0.0, max_x = 1.0, min_y = 0.0, max_y = 1.0;
    if (points.rows > 0) {
        min_x = max_x = points.at(0, 0);
        min_y = max_y = points.at(0, 1);
        for (size_t i = 1; i < points.rows; ++i) {
            min_x = std::min(min_x, points.at(i, 0));
            max_x = std::max(max_x, points.at(i, 0));
            min_y = std::min(min_y, points.at(i, 1));
            max_y = std::max(max_y, points.at(i, 1));
        }
    }
    double span_x = max_x - min_x, span_y = max_y - min_y;
    if (span_x <= 0.0) span_x = 1.0;
    if (span_y <= 0.0) span_y = 1.0;
    const double margin_x = 0.05 * span_x, margin_y = 0.05 * span_y;
    min_x -= margin_x;
    max_x += margin_x;
    min_y -= margin_y;
    max_y += margin_y;
    span_x = max_x - min_x;
    span_y = max_y - min_y;

    std::set<int> label_set;
    if (labels) label_set.insert(labels->begin(), labels->end());
    const double legend_width = labels ? 130.0 : 0.0;

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
           format_double(size + legend_width) + "\" height=\"" + format_double(size) +
           "\" viewBox=\"0 0 " + format_double(size + legend_width) + " " + format_double(size) +
           "\">\n";
    svg += "<rect width=\"" + format_double(size + legend_width) + "\" height=\"" +
           format_double(size) + "\" fill=\"#ffffff\"/>\n";
    for (size_t i = 0; i < points.rows; ++i) {
        const double cx = (points.at(i, 0) - min_x) / span_x * size;
        const double cy = size - (points.at(i, 1) - min_y) / span_y * size;
        const char* color = labels ? scatter_color((*labels)[i]) : "#1f77b4";
        svg += "<circle cx=\"" + format_double(cx) + "\" cy=\"" + format_double(cy) +
               "\" r=\"2.5\" fill=\"" + std::string(color) + "\" fill-opacity=\"0.8\"/>\n";
    }
    if (labels) {
        double y = 24.0;
        for (int label : label_set) {
            svg += "<rect x=\"" + format_double(size + 12.0) + "\" y=\"" + format_double(y - 10.0) +
                   "\" width=\"12\" height=\"12\" fill=\"" + std::string(scatter_color(label)) +
                   "\"/>\n";
            svg += "<text x=\"" + format_double(size + 30.0) + "\" y=\"" + format_double(y) +
                   "\" font-family=\"sans-serif\" font-size=\"14\">label " +
                   std::to_string(label) + "</text>\n";
            y += 20.0;
        }
    }
    svg += "</svg>\n";
    return svg;
}

}

#endif
