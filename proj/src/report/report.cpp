// Copyright 2026 The wmprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include "wmprobe/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>

#include "wmprobe/decomposition.hpp"
#include "wmprobe/error.hpp"
#include "wmprobe/json_file.hpp"

namespace wmprobe::report {

TaskResult summarize_task(const TaskSpec& task, const NestedDataset& d,
                          const std::optional<stats::BootstrapOptions>& bootstrap) {
    TaskResult r;
    r.task_id = task.task_id;
    r.category = std::string(to_string(task.category));
    r.unit = task.unit;
    if (bootstrap) {
        const auto b = stats::bootstrap(d, *bootstrap);
        r.decomposition = b.point;
        r.bootstrap = BootstrapSummary{b.replicates, b.skipped, b.level, b.seed, b.ps, b.as_share, b.mu, b.mvs};
    } else {
        r.decomposition = stats::decompose_variance(d);
    }
    for (const auto& intent : d.intents)
        for (const auto& p : intent.prompts) {
            double sum = 0.0;
            for (double v : p.values) sum += v;
            r.cells.push_back({intent.intent_id, p.prompt_id, p.values.size(), sum / static_cast<double>(p.values.size())});
        }
    return r;
}

namespace {

std::string printf_str(const char* fmt, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, x);
    return buf;
}

std::string fixed(double x, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, x);
    // "-0.000" reads as a sign error in a chart
    std::string s = buf;
    if (s.starts_with('-') && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
    return s;
}

std::string pad(std::string s, std::size_t width) {
    if (s.size() < width) s.append(width - s.size(), ' ');
    else s.push_back(' ');
    return s;
}

std::string interval_text(const stats::Interval& i) { return "[" + fixed(i.lower, 3) + ", " + fixed(i.upper, 3) + "]"; }

std::string rstrip(std::string s) {
    while (!s.empty() && s.back() == ' ') s.pop_back();
    return s;
}

std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string opt_exact(const std::optional<double>& x) { return x ? format_exact(*x) : std::string(); }

constexpr std::size_t kTaskWidth = 26;
constexpr std::size_t kModelWidth = 26;
constexpr std::size_t kVarWidth = 11;
constexpr std::size_t kShareWidth = 24;

}  // namespace

std::string format_variance(double v) { return printf_str("%.2e", v); }

std::string format_shares(double ps, double as_share, double mu) {
    return fixed(ps, 3) + " / " + fixed(as_share, 3) + " / " + fixed(mu, 3);
}

std::string format_exact(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    if (ec != std::errc{}) throw Error(Errc::InvalidArgument, "cannot format number");
    return std::string(buf, ptr);
}

std::string render_table(std::span<const RunResults> runs) {
    std::string out = rstrip(pad("task", kTaskWidth) + pad("model", kModelWidth) + pad("variance", kVarWidth) +
                             pad("PS / AS / MU", kShareWidth) + "MVS") +
                      "\n";
    for (const auto& run : runs)
        for (const auto& t : run.tasks) {
            const auto& d = t.decomposition;
            out += rstrip(pad(t.task_id, kTaskWidth) + pad(run.model_id, kModelWidth) +
                          pad(format_variance(d.total_variance), kVarWidth) +
                          pad(format_shares(d.ps, d.as_share, d.mu), kShareWidth) + (d.mvs ? fixed(*d.mvs, 3) : "n/a")) +
                   "\n";
            if (t.bootstrap) {
                const auto& b = *t.bootstrap;
                char label[32];
                std::snprintf(label, sizeof label, "%g%% interval", b.level * 100.0);
                out += rstrip(pad("", kTaskWidth) + pad(label, kModelWidth) + pad("", kVarWidth) +
                              interval_text(b.ps) + " / " + interval_text(b.as_share) + " / " + interval_text(b.mu) +
                              "  " + (b.mvs ? interval_text(*b.mvs) : "n/a")) +
                       "\n";
            }
        }
    return out;
}

std::string render_csv(std::span<const RunResults> runs) {
    std::string out =
        "task_id,category,model,run_id,unit,variance,ps,as,mu,mvs,ps_lo,ps_hi,as_lo,as_hi,mu_lo,mu_hi,mvs_lo,mvs_hi,"
        "n_intents,n_prompts,n_obs,replicates,level\n";
    for (const auto& run : runs)
        for (const auto& t : run.tasks) {
            const auto& d = t.decomposition;
            std::vector<std::string> f{csv_field(t.task_id), csv_field(t.category), csv_field(run.model_id),
                                       csv_field(run.run_id), csv_field(t.unit), format_exact(d.total_variance),
                                       format_exact(d.ps), format_exact(d.as_share), format_exact(d.mu),
                                       opt_exact(d.mvs)};
            if (t.bootstrap) {
                const auto& b = *t.bootstrap;
                for (const auto* i : {&b.ps, &b.as_share, &b.mu}) {
                    f.push_back(format_exact(i->lower));
                    f.push_back(format_exact(i->upper));
                }
                f.push_back(b.mvs ? format_exact(b.mvs->lower) : "");
                f.push_back(b.mvs ? format_exact(b.mvs->upper) : "");
            } else {
                f.insert(f.end(), 8, "");
            }
            f.push_back(std::to_string(d.n_intents));
            f.push_back(std::to_string(d.n_prompts));
            f.push_back(std::to_string(d.n_obs));
            f.push_back(t.bootstrap ? std::to_string(t.bootstrap->replicates) : "");
            f.push_back(t.bootstrap ? format_exact(t.bootstrap->level) : "");
            for (std::size_t k = 0; k < f.size(); ++k) out += (k ? "," : "") + f[k];
            out += "\n";
        }
    return out;
}

std::vector<CategoryAverage> category_averages(std::span<const RunResults> runs) {
    std::set<std::string> categories;
    for (const auto& run : runs)
        for (const auto& t : run.tasks) categories.insert(t.category);

    std::vector<CategoryAverage> out;
    for (const auto& c : categories)
        for (const auto& run : runs) {
            CategoryAverage a{run.model_id, c, 0, 0.0, 0.0, 0.0, std::nullopt};
            double mvs_sum = 0.0;
            std::size_t mvs_n = 0;
            for (const auto& t : run.tasks) {
                if (t.category != c) continue;
                ++a.n_tasks;
                a.ps += t.decomposition.ps;
                a.as_share += t.decomposition.as_share;
                a.mu += t.decomposition.mu;
                if (t.decomposition.mvs) {
                    mvs_sum += *t.decomposition.mvs;
                    ++mvs_n;
                }
            }
            if (a.n_tasks == 0) continue;
            const double n = static_cast<double>(a.n_tasks);
            a.ps /= n;
            a.as_share /= n;
            a.mu /= n;
            if (mvs_n) a.mvs = mvs_sum / static_cast<double>(mvs_n);
            out.push_back(std::move(a));
        }
    return out;
}

double silverman_bandwidth(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n < 2) return 0.0;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (!(sd > 0.0)) return 0.0;
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double iqr = stats::quantile_sorted(sorted, 0.75) - stats::quantile_sorted(sorted, 0.25);
    const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
    return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

std::vector<double> gaussian_kde(std::span<const double> values, double bandwidth, std::span<const double> grid) {
    if (!(bandwidth > 0.0)) throw Error(Errc::InvalidArgument, "KDE bandwidth must be positive");
    if (values.empty()) throw Error(Errc::InvalidArgument, "KDE of an empty sample");
    const double norm = 1.0 / (static_cast<double>(values.size()) * bandwidth * std::sqrt(2.0 * std::numbers::pi));
    std::vector<double> out;
    out.reserve(grid.size());
    for (double x : grid) {
        double s = 0.0;
        for (double v : values) {
            const double z = (x - v) / bandwidth;
            s += std::exp(-0.5 * z * z);
        }
        out.push_back(s * norm);
    }
    return out;
}

std::vector<KdeCurve> kde_curves(const TaskResult& result, const NestedDataset& d, std::size_t points) {
    if (d.mode != DatasetMode::Numeric) throw Error(Errc::InvalidArgument, "KDE needs a numeric dataset");
    if (points < 2) throw Error(Errc::InvalidArgument, "KDE grid needs at least 2 points");

    std::map<std::pair<std::string, std::string>, double> means;
    for (const auto& c : result.cells) means[{c.intent_id, c.prompt_id}] = c.mean;

    double lo = INFINITY, hi = -INFINITY, max_bw = 0.0;
    std::vector<KdeCurve> out;
    for (const auto& intent : d.intents)
        for (const auto& p : intent.prompts) {
            KdeCurve c;
            c.intent_id = intent.intent_id;
            c.prompt_id = p.prompt_id;
            c.bandwidth = silverman_bandwidth(p.values);
            auto it = means.find({intent.intent_id, p.prompt_id});
            if (it == means.end())
                throw Error(Errc::InvalidArgument, "results lack cell (" + intent.intent_id + ", " + p.prompt_id + ")");
            c.mean = it->second;
            max_bw = std::max(max_bw, c.bandwidth);
            for (double v : p.values) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            out.push_back(std::move(c));
        }
    const double margin = max_bw > 0.0 ? 3.0 * max_bw : std::max(1.0, std::abs(hi) * 0.05);
    lo -= margin;
    hi += margin;
    std::vector<double> grid(points);
    for (std::size_t k = 0; k < points; ++k)
        grid[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1);

    std::size_t idx = 0;
    for (const auto& intent : d.intents)
        for (const auto& p : intent.prompts) {
            auto& c = out[idx++];
            c.xs = grid;
            if (c.bandwidth > 0.0) c.density = gaussian_kde(p.values, c.bandwidth, grid);
        }
    return out;
}

// --- SVG -------------------------------------------------------------------------------

namespace {

constexpr const char* kPsColor = "#4c72b0";
constexpr const char* kAsColor = "#dd8452";
constexpr const char* kMuColor = "#55a868";

class Svg {
public:
    Svg(double w, double h) : w_(w), h_(h) {}

    void rect(double x, double y, double w, double h, std::string_view fill, std::string_view cls = {}) {
        body_ += "<rect x=\"" + fixed(x, 2) + "\" y=\"" + fixed(y, 2) + "\" width=\"" + fixed(w, 2) + "\" height=\"" +
                 fixed(h, 2) + "\" fill=\"" + std::string(fill) + "\"";
        if (!cls.empty()) body_ += " class=\"" + std::string(cls) + "\"";
        body_ += "/>\n";
    }
    void line(double x1, double y1, double x2, double y2, std::string_view stroke, double width = 1.0,
              std::string_view cls = {}) {
        body_ += "<line x1=\"" + fixed(x1, 2) + "\" y1=\"" + fixed(y1, 2) + "\" x2=\"" + fixed(x2, 2) + "\" y2=\"" +
                 fixed(y2, 2) + "\" stroke=\"" + std::string(stroke) + "\" stroke-width=\"" + fixed(width, 2) + "\"";
        if (!cls.empty()) body_ += " class=\"" + std::string(cls) + "\"";
        body_ += "/>\n";
    }
    void text(double x, double y, std::string_view s, std::string_view anchor = "start", int size = 11) {
        body_ += "<text x=\"" + fixed(x, 2) + "\" y=\"" + fixed(y, 2) + "\" font-size=\"" + std::to_string(size) +
                 "\" text-anchor=\"" + std::string(anchor) + "\">" + xml_escape(s) + "</text>\n";
    }
    void polyline(const std::vector<std::pair<double, double>>& pts, std::string_view stroke) {
        body_ += "<polyline fill=\"none\" stroke=\"" + std::string(stroke) + "\" stroke-opacity=\"0.5\" points=\"";
        for (std::size_t k = 0; k < pts.size(); ++k)
            body_ += (k ? " " : "") + fixed(pts[k].first, 2) + "," + fixed(pts[k].second, 2);
        body_ += "\"/>\n";
    }
    std::string str() const {
        return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fixed(w_, 0) + "\" height=\"" + fixed(h_, 0) +
               "\" viewBox=\"0 0 " + fixed(w_, 0) + " " + fixed(h_, 0) + "\" font-family=\"sans-serif\">\n" +
               "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n" + body_ + "</svg>\n";
    }

private:
    double w_, h_;
    std::string body_;
};

struct BarLayout {
    std::vector<std::string> categories;
    std::vector<std::string> models;
    double bar = 26.0, gap = 24.0, left = 60.0, top = 40.0, plot_h = 220.0;

    double group_width() const { return bar * static_cast<double>(models.size()); }
    double width() const { return left + static_cast<double>(categories.size()) * (group_width() + gap) + 140.0; }
    double height() const { return top + plot_h + 70.0; }
    double x(std::size_t c, std::size_t m) const {
        return left + gap / 2 + static_cast<double>(c) * (group_width() + gap) + bar * static_cast<double>(m);
    }
    double y(double v) const { return top + plot_h * (1.0 - v); }
};

BarLayout layout_for(std::span<const CategoryAverage> a) {
    BarLayout l;
    for (const auto& x : a) {
        if (std::find(l.categories.begin(), l.categories.end(), x.category) == l.categories.end())
            l.categories.push_back(x.category);
        if (std::find(l.models.begin(), l.models.end(), x.model_id) == l.models.end()) l.models.push_back(x.model_id);
    }
    return l;
}

void axes(Svg& svg, const BarLayout& l, std::string_view title) {
    svg.text(l.left, 20, title, "start", 13);
    const double right = l.width() - 140.0;
    for (int k = 0; k <= 4; ++k) {
        const double v = k / 4.0;
        svg.line(l.left, l.y(v), right, l.y(v), "#dddddd", 0.5);
        svg.text(l.left - 6, l.y(v) + 4, fixed(v, 2), "end", 10);
    }
    svg.line(l.left, l.y(0), right, l.y(0), "black");
    for (std::size_t c = 0; c < l.categories.size(); ++c)
        svg.text(l.x(c, 0) + l.group_width() / 2, l.y(0) + 16, l.categories[c], "middle", 10);
    for (std::size_t m = 0; m < l.models.size(); ++m)
        svg.text(right + 10, l.top + 60 + 14.0 * static_cast<double>(m), "bar " + std::to_string(m + 1) + ": " + l.models[m],
                 "start", 10);
}

std::size_t index_of(const std::vector<std::string>& v, const std::string& s) {
    return static_cast<std::size_t>(std::find(v.begin(), v.end(), s) - v.begin());
}

}  // namespace

std::string shares_svg(std::span<const CategoryAverage> averages) {
    const auto l = layout_for(averages);
    Svg svg(l.width(), l.height());
    axes(svg, l, "Average PS / AS / MU by category");
    for (const auto& a : averages) {
        const double x = l.x(index_of(l.categories, a.category), index_of(l.models, a.model_id)) + 2;
        double base = 0.0;
        for (auto [v, color, cls] : {std::tuple{a.ps, kPsColor, "ps"}, std::tuple{a.as_share, kAsColor, "as"},
                                     std::tuple{a.mu, kMuColor, "mu"}}) {
            svg.rect(x, l.y(base + v), l.bar - 4, l.y(base) - l.y(base + v), color, cls);
            base += v;
        }
    }
    const double lx = l.width() - 130.0;
    for (auto [k, label, color] : {std::tuple{0, "PS", kPsColor}, std::tuple{1, "AS", kAsColor},
                                   std::tuple{2, "MU", kMuColor}}) {
        svg.rect(lx, l.top + 14.0 * k, 10, 10, color);
        svg.text(lx + 14, l.top + 9 + 14.0 * k, label, "start", 10);
    }
    return svg.str();
}

std::string mvs_svg(std::span<const CategoryAverage> averages) {
    const auto l = layout_for(averages);
    Svg svg(l.width(), l.height());
    axes(svg, l, "Meaningful variability share by category");
    for (const auto& a : averages) {
        if (!a.mvs) continue;
        const double x = l.x(index_of(l.categories, a.category), index_of(l.models, a.model_id)) + 2;
        svg.rect(x, l.y(*a.mvs), l.bar - 4, l.y(0) - l.y(*a.mvs), kPsColor, "mvs");
    }
    return svg.str();
}

std::string kde_svg(const TaskResult& result, std::span<const KdeCurve> curves) {
    std::vector<std::string> intents;
    for (const auto& c : curves)
        if (std::find(intents.begin(), intents.end(), c.intent_id) == intents.end()) intents.push_back(c.intent_id);

    const double left = 60, top = 40, pw = 560, ph = 140, vgap = 36;
    Svg svg(left + pw + 30, top + static_cast<double>(intents.size()) * (ph + vgap) + 20);
    svg.text(left, 20, "Conditional response distributions: " + result.task_id + " (" + result.unit + ")", "start", 13);
    if (curves.empty()) return svg.str();

    const double xlo = curves.front().xs.front(), xhi = curves.front().xs.back();
    auto sx = [&](double x) { return left + pw * (x - xlo) / (xhi - xlo); };

    for (std::size_t r = 0; r < intents.size(); ++r) {
        const double y0 = top + static_cast<double>(r) * (ph + vgap);
        double ymax = 0.0;
        double weighted = 0.0;
        std::size_t n = 0;
        for (const auto& c : curves) {
            if (c.intent_id != intents[r]) continue;
            for (double v : c.density) ymax = std::max(ymax, v);
        }
        for (const auto& cell : result.cells)
            if (cell.intent_id == intents[r]) {
                weighted += cell.mean * static_cast<double>(cell.n);
                n += cell.n;
            }
        if (!(ymax > 0.0)) ymax = 1.0;
        auto sy = [&](double v) { return y0 + ph * (1.0 - v / ymax); };

        svg.line(left, y0 + ph, left + pw, y0 + ph, "black");
        svg.text(left - 6, y0 + 12, "intent " + intents[r], "end", 10);
        for (const auto& c : curves) {
            if (c.intent_id != intents[r]) continue;
            if (c.density.empty()) {
                svg.line(sx(c.mean), y0 + ph, sx(c.mean), y0, "#555555", 2.0, "point-mass");
            } else {
                std::vector<std::pair<double, double>> pts;
                pts.reserve(c.xs.size());
                for (std::size_t k = 0; k < c.xs.size(); ++k) pts.emplace_back(sx(c.xs[k]), sy(c.density[k]));
                svg.polyline(pts, "#555555");
            }
            svg.line(sx(c.mean), y0 + ph, sx(c.mean), y0 + ph * 0.6, "red", 1.0, "prompt-mean");
        }
        if (n) {
            const double overall = weighted / static_cast<double>(n);
            svg.line(sx(overall), y0 + ph, sx(overall), y0, "blue", 1.5, "overall-mean");
        }
        if (r + 1 == intents.size()) {
            svg.text(left, y0 + ph + 14, fixed(xlo, 2), "start", 10);
            svg.text(left + pw, y0 + ph + 14, fixed(xhi, 2), "end", 10);
        }
    }
    return svg.str();
}

std::string shares_csv(std::span<const CategoryAverage> averages) {
    std::string out = "model,category,n_tasks,ps,as,mu,mvs\n";
    for (const auto& a : averages)
        out += csv_field(a.model_id) + "," + csv_field(a.category) + "," + std::to_string(a.n_tasks) + "," +
               format_exact(a.ps) + "," + format_exact(a.as_share) + "," + format_exact(a.mu) + "," + opt_exact(a.mvs) +
               "\n";
    return out;
}

std::string kde_csv(std::span<const KdeCurve> curves) {
    std::string out = "intent_id,prompt_id,bandwidth,mean,x,density\n";
    for (const auto& c : curves) {
        const std::string prefix = csv_field(c.intent_id) + "," + csv_field(c.prompt_id) + "," +
                                   format_exact(c.bandwidth) + "," + format_exact(c.mean) + ",";
        if (c.density.empty()) {
            out += prefix + format_exact(c.mean) + ",\n";
            continue;
        }
        for (std::size_t k = 0; k < c.xs.size(); ++k)
            out += prefix + format_exact(c.xs[k]) + "," + format_exact(c.density[k]) + "\n";
    }
    return out;
}

std::vector<std::filesystem::path> write_report(const std::filesystem::path& out_dir, std::span<const RunResults> runs,
                                                const std::map<std::string, NestedDataset>& datasets) {
    std::vector<std::filesystem::path> written;
    auto emit = [&](const std::string& name, const std::string& text) {
        write_text_file(out_dir / name, text);
        written.push_back(out_dir / name);
    };
    emit("report.txt", render_table(runs));
    emit("report.csv", render_csv(runs));
    const auto averages = category_averages(runs);
    emit("shares.svg", shares_svg(averages));
    emit("shares.csv", shares_csv(averages));
    emit("mvs.svg", mvs_svg(averages));
    emit("mvs.csv", shares_csv(averages));
    if (!runs.empty())
        for (const auto& t : runs.front().tasks) {
            auto it = datasets.find(t.task_id);
            if (it == datasets.end()) continue;
            const auto curves = kde_curves(t, it->second);
            emit("kde_" + t.task_id + ".svg", kde_svg(t, curves));
            emit("kde_" + t.task_id + ".csv", kde_csv(curves));
        }
    return written;
}

}  // namespace wmprobe::report
