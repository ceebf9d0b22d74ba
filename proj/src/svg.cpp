#include "cascadelab/svg.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "cascadelab/dataset.hpp"

namespace cascadelab {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 440.0;
constexpr double kLeft = 64.0;
constexpr double kRight = 24.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 48.0;

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

// Fixed two-decimal formatting for coordinates keeps the output stable and
// small; data values in the legend use exact shortest round-trip form.
std::string coord(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace

std::string render_curve_svg(const std::vector<PlotSeries>& series, const std::string& title) {
    if (series.empty()) throw ConfigError("plot: no series to draw");

    double y_min = 1.0, y_max = 0.0;
    for (const auto& s : series) {
        for (const auto& [x, y] : s.points) {
            y_min = std::min(y_min, y);
            y_max = std::max(y_max, y);
        }
    }
    if (y_min > y_max) throw ConfigError("plot: series have no points");
    // pad the accuracy axis a little and clamp to [0, 1]
    const double pad = std::max(0.02, (y_max - y_min) * 0.08);
    y_min = std::max(0.0, y_min - pad);
    y_max = std::min(1.0, y_max + pad);
    if (y_max - y_min < 1e-9) {
        y_min = std::max(0.0, y_min - 0.05);
        y_max = std::min(1.0, y_max + 0.05);
    }

    const double plot_w = kWidth - kLeft - kRight;
    const double plot_h = kHeight - kTop - kBottom;
    const auto sx = [&](double x) { return kLeft + x * plot_w; };
    const auto sy = [&](double y) { return kTop + (y_max - y) / (y_max - y_min) * plot_h; };

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << coord(kWidth)
        << "\" height=\"" << coord(kHeight) << "\" viewBox=\"0 0 " << coord(kWidth) << ' '
        << coord(kHeight) << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << coord(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"15\">" << title << "</text>\n";

    // frame
    out << "<rect x=\"" << coord(kLeft) << "\" y=\"" << coord(kTop) << "\" width=\""
        << coord(plot_w) << "\" height=\"" << coord(plot_h)
        << "\" fill=\"none\" stroke=\"#444444\" stroke-width=\"1\"/>\n";

    // x ticks at 0, 0.2, ..., 1.0; y ticks at 5 even steps
    for (int i = 0; i <= 5; ++i) {
        const double x = static_cast<double>(i) / 5.0;
        out << "<line x1=\"" << coord(sx(x)) << "\" y1=\"" << coord(kTop + plot_h) << "\" x2=\""
            << coord(sx(x)) << "\" y2=\"" << coord(kTop + plot_h + 5) << "\" stroke=\"#444444\"/>\n";
        out << "<text x=\"" << coord(sx(x)) << "\" y=\"" << coord(kTop + plot_h + 20)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
            << coord(x) << "</text>\n";
        const double y = y_min + (y_max - y_min) * static_cast<double>(i) / 5.0;
        out << "<line x1=\"" << coord(kLeft - 5) << "\" y1=\"" << coord(sy(y)) << "\" x2=\""
            << coord(kLeft) << "\" y2=\"" << coord(sy(y)) << "\" stroke=\"#444444\"/>\n";
        out << "<text x=\"" << coord(kLeft - 9) << "\" y=\"" << coord(sy(y) + 4)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
            << coord(y) << "</text>\n";
    }
    out << "<text x=\"" << coord(kLeft + plot_w / 2) << "\" y=\"" << coord(kHeight - 10)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
        << "deferral rate</text>\n";
    out << "<text x=\"16\" y=\"" << coord(kTop + plot_h / 2)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
        << "transform=\"rotate(-90 16 " << coord(kTop + plot_h / 2) << ")\">accuracy</text>\n";

    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = kPalette[s % (sizeof(kPalette) / sizeof(kPalette[0]))];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\"";
        for (const auto& [x, y] : series[s].points) {
            out << coord(sx(x)) << ',' << coord(sy(y)) << ' ';
        }
        out << "\"/>\n";
        const double ly = kTop + 14.0 + 16.0 * static_cast<double>(s);
        out << "<line x1=\"" << coord(kLeft + 10) << "\" y1=\"" << coord(ly - 4) << "\" x2=\""
            << coord(kLeft + 34) << "\" y2=\"" << coord(ly - 4) << "\" stroke=\"" << color
            << "\" stroke-width=\"1.8\"/>\n";
        out << "<text x=\"" << coord(kLeft + 40) << "\" y=\"" << coord(ly)
            << "\" font-family=\"sans-serif\" font-size=\"11\">" << series[s].label
            << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

void emit_plot(const std::vector<std::filesystem::path>& curve_csvs,
               const std::filesystem::path& out_svg) {
    if (curve_csvs.empty()) throw ConfigError("plot: no input files");
    std::vector<PlotSeries> series;
    std::string title;
    for (const auto& path : curve_csvs) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open for reading: " + path.string());
        std::string line;
        if (!std::getline(in, line)) throw ParseError("empty curve CSV: " + path.string());
        if (line != "rule,scenario,seed,threshold,deferral_rate,accuracy,risk,relative_cost") {
            throw ParseError("unexpected curve CSV header in " + path.string());
        }
        std::map<std::string, std::size_t> index;
        std::size_t lineno = 1;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            std::istringstream fields(line);
            std::string rule, scenario, seed, threshold, rate, accuracy;
            std::getline(fields, rule, ',');
            std::getline(fields, scenario, ',');
            std::getline(fields, seed, ',');
            std::getline(fields, threshold, ',');
            std::getline(fields, rate, ',');
            std::getline(fields, accuracy, ',');
            if (accuracy.empty()) {
                throw ParseError(path.string() + ":" + std::to_string(lineno) +
                                 ": too few fields");
            }
            if (title.empty()) title = scenario;
            std::string label = rule;
            if (curve_csvs.size() > 1) label = path.stem().string() + ":" + rule;
            auto [it, fresh] = index.try_emplace(label, series.size());
            if (fresh) series.push_back(PlotSeries{label, {}});
            try {
                series[it->second].points.emplace_back(std::stod(rate), std::stod(accuracy));
            } catch (const std::exception&) {
                throw ParseError(path.string() + ":" + std::to_string(lineno) +
                                 ": bad numeric field");
            }
        }
    }
    if (series.empty()) throw ParseError("curve CSVs contain no data rows");
    const std::string svg = render_curve_svg(series, title);
    std::ofstream out(out_svg, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + out_svg.string());
    out << svg;
    if (!out) throw IoError("write failed: " + out_svg.string());
}

}  // namespace cascadelab
