#pragma once

#include <string>
#include <vector>

namespace gnnla::svg {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

/// Standalone line chart. log_y plots log10 of positive values.
std::string line_chart(const std::string& title, const std::vector<Series>& series, const std::string& x_label,
                       const std::string& y_label, bool log_y = false);

struct Histogram {
    std::string label;
    std::vector<double> edges; // bins + 1
    std::vector<std::size_t> counts;
};

/// One panel per histogram, side by side, with a marker at x = 0.
std::string histograms(const std::string& title, const std::vector<Histogram>& panels, const std::string& x_label);

} // namespace gnnla::svg
