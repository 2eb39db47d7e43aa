#include "gnnla/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace gnnla::svg {

namespace {

const char* const palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

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

std::string text(double x, double y, const std::string& s, const char* anchor = "middle", int size = 12) {
    return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-size=\"" + std::to_string(size) +
           "\" text-anchor=\"" + anchor + "\" font-family=\"sans-serif\">" + escape(s) + "</text>\n";
}

std::string header(int w, int h) {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) + "\" height=\"" +
           std::to_string(h) + "\" viewBox=\"0 0 " + std::to_string(w) + " " + std::to_string(h) +
           "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

} // namespace

std::string line_chart(const std::string& title, const std::vector<Series>& series, const std::string& x_label,
                       const std::string& y_label, bool log_y) {
    const int w = 640, h = 420, l = 70, r = 20, t = 40, b = 50;
    auto ty = [log_y](double v) { return log_y ? std::log10(v) : v; };
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& s : series)
        for (std::size_t k = 0; k < s.x.size(); ++k) {
            if (log_y && !(s.y[k] > 0)) continue;
            if (!std::isfinite(s.y[k])) continue;
            x0 = std::min(x0, s.x[k]);
            x1 = std::max(x1, s.x[k]);
            y0 = std::min(y0, ty(s.y[k]));
            y1 = std::max(y1, ty(s.y[k]));
        }
    if (!(x1 > x0)) x1 = x0 + 1;
    if (!(y1 > y0)) y1 = y0 + 1;
    auto px = [&](double v) { return l + (v - x0) / (x1 - x0) * (w - l - r); };
    auto py = [&](double v) { return h - b - (v - y0) / (y1 - y0) * (h - t - b); };

    std::string out = header(w, h);
    out += text(w / 2.0, 24, title, "middle", 15);
    out += "<rect x=\"" + num(l) + "\" y=\"" + num(t) + "\" width=\"" + num(w - l - r) + "\" height=\"" +
           num(h - t - b) + "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
        out += text(px(xv), h - b + 16, tick(xv));
        out += text(l - 6, py(yv) + 4, log_y ? "1e" + tick(yv) : tick(yv), "end");
    }
    out += text(w / 2.0, h - 12, x_label);
    out += "<text x=\"16\" y=\"" + num(h / 2.0) + "\" font-size=\"12\" text-anchor=\"middle\" font-family=\"sans-serif\"" +
           " transform=\"rotate(-90 16 " + num(h / 2.0) + ")\">" + escape(y_label) + "</text>\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = palette[s % 5];
        std::string pts;
        for (std::size_t k = 0; k < series[s].x.size(); ++k) {
            const double yv = series[s].y[k];
            if (!std::isfinite(yv) || (log_y && !(yv > 0))) continue;
            pts += num(px(series[s].x[k])) + "," + num(py(ty(yv))) + " ";
        }
        out += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\" points=\"" + pts + "\"/>\n";
        out += "<rect x=\"" + num(w - r - 150) + "\" y=\"" + num(t + 10 + 18 * s) + "\" width=\"12\" height=\"12\" fill=\"" +
               color + "\"/>\n";
        out += text(w - r - 132, t + 21 + 18 * s, series[s].label, "start");
    }
    return out + "</svg>\n";
}

std::string histograms(const std::string& title, const std::vector<Histogram>& panels, const std::string& x_label) {
    const int pw = 300, h = 320, l = 40, r = 15, t = 50, b = 50;
    const int w = static_cast<int>(panels.size()) * pw;
    std::string out = header(std::max(w, pw), h);
    out += text(std::max(w, pw) / 2.0, 22, title, "middle", 15);
    for (std::size_t p = 0; p < panels.size(); ++p) {
        const auto& hg = panels[p];
        const double ox = static_cast<double>(p) * pw;
        const double x0 = hg.edges.front(), x1 = hg.edges.back() > x0 ? hg.edges.back() : x0 + 1;
        std::size_t cmax = 1;
        for (auto c : hg.counts) cmax = std::max(cmax, c);
        auto px = [&](double v) { return ox + l + (v - x0) / (x1 - x0) * (pw - l - r); };
        auto py = [&](double c) { return h - b - c / static_cast<double>(cmax) * (h - t - b); };
        out += text(ox + pw / 2.0, t - 8, hg.label);
        for (std::size_t k = 0; k < hg.counts.size(); ++k) {
            const double a = px(hg.edges[k]), c = px(hg.edges[k + 1]);
            out += "<rect x=\"" + num(a) + "\" y=\"" + num(py(static_cast<double>(hg.counts[k]))) + "\" width=\"" +
                   num(std::max(c - a, 1.0)) + "\" height=\"" + num(h - b - py(static_cast<double>(hg.counts[k]))) +
                   "\" fill=\"" + palette[p % 5] + "\" stroke=\"white\"/>\n";
        }
        if (x0 <= 0 && 0 <= x1)
            out += "<line x1=\"" + num(px(0)) + "\" x2=\"" + num(px(0)) + "\" y1=\"" + num(t) + "\" y2=\"" +
                   num(h - b) + "\" stroke=\"black\" stroke-dasharray=\"4 3\"/>\n";
        out += "<line x1=\"" + num(ox + l) + "\" x2=\"" + num(ox + pw - r) + "\" y1=\"" + num(h - b) + "\" y2=\"" +
               num(h - b) + "\" stroke=\"#444\"/>\n";
        out += text(ox + l, h - b + 16, tick(x0));
        out += text(ox + pw - r, h - b + 16, tick(x1));
        out += text(ox + l - 4, py(static_cast<double>(cmax)) + 4, std::to_string(cmax), "end");
    }
    out += text(std::max(w, pw) / 2.0, h - 12, x_label);
    return out + "</svg>\n";
}

} // namespace gnnla::svg
