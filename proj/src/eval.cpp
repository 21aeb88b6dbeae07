#include "sicu/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "sicu/error.hpp"

namespace sicu {

using nlohmann::json;

BerCount ber(std::span<const std::uint8_t> reference, std::span<const std::uint8_t> decided) {
    if (reference.size() != decided.size()) {
        throw InvalidInput("ber: reference has " + std::to_string(reference.size()) + " bits, decision has " +
                           std::to_string(decided.size()));
    }
    BerCount c;
    c.bits = reference.size();
    for (std::size_t i = 0; i < reference.size(); ++i) c.errors += (reference[i] & 1u) != (decided[i] & 1u);
    return c;
}

// ---- confusion -----------------------------------------------------------------

ConfusionMatrix::ConfusionMatrix(std::size_t classes, std::vector<std::string> class_names)
    : k_(classes), names_(std::move(class_names)), counts_(classes * classes, 0) {
    if (classes == 0) throw InvalidInput("confusion: need at least one class");
    if (names_.empty()) {
        for (std::size_t k = 0; k < classes; ++k) names_.push_back(std::to_string(k));
    }
    if (names_.size() != classes) throw InvalidInput("confusion: class name count does not match K");
}

void ConfusionMatrix::add(int label, int pred, std::uint64_t n) {
    const auto k = static_cast<int>(k_);
    if (label < 0 || label >= k || pred < 0 || pred >= k) {
        throw InvalidInput("confusion: (label " + std::to_string(label) + ", pred " + std::to_string(pred) +
                           ") outside [0, " + std::to_string(k_) + ")");
    }
    counts_[static_cast<std::size_t>(label) * k_ + static_cast<std::size_t>(pred)] += n;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
    if (other.k_ != k_) throw InvalidInput("confusion: cannot merge matrices of different size");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::uint64_t ConfusionMatrix::row_total(std::size_t label) const {
    std::uint64_t s = 0;
    for (std::size_t p = 0; p < k_; ++p) s += count(label, p);
    return s;
}

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t s = 0;
    for (auto c : counts_) s += c;
    return s;
}

std::uint64_t ConfusionMatrix::correct() const {
    std::uint64_t s = 0;
    for (std::size_t k = 0; k < k_; ++k) s += count(k, k);
    return s;
}

double ConfusionMatrix::accuracy() const {
    const auto t = total();
    return t ? static_cast<double>(correct()) / static_cast<double>(t) : 0.0;
}

ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> labels, std::size_t classes,
                          std::vector<std::string> class_names) {
    if (preds.size() != labels.size()) throw InvalidInput("confusion: prediction and label counts differ");
    ConfusionMatrix m(classes, std::move(class_names));
    for (std::size_t i = 0; i < preds.size(); ++i) m.add(labels[i], preds[i]);
    return m;
}

void BerCurve::merge(const BerCurve& other) {
    for (const auto& [key, count] : other.bins) bins[key] += count;
}

const BerCurve* EvalReport::curve(const std::string& method) const {
    for (const auto& c : curves) {
        if (c.method == method) return &c;
    }
    return nullptr;
}

// ---- JSON ------------------------------------------------------------------------

void to_json(json& j, const EvalReport& r) {
    json acc = json::array();
    for (const auto& a : r.accuracies) acc.push_back({{"stage", a.stage}, {"correct", a.correct}, {"total", a.total}});
    json conf = json::object();
    for (const auto& [stage, m] : r.confusions) {
        json counts = json::array();
        for (std::size_t l = 0; l < m.classes(); ++l) {
            json row = json::array();
            for (std::size_t p = 0; p < m.classes(); ++p) row.push_back(m.count(l, p));
            counts.push_back(row);
        }
        conf[stage] = {{"classes", m.class_names()}, {"counts", counts}};
    }
    json curves = json::array();
    for (const auto& c : r.curves) {
        json bins = json::array();
        for (const auto& [key, count] : c.bins) {
            bins.push_back({{"sps", key.first}, {"sir_bin_db", key.second}, {"errors", count.errors}, {"bits", count.bits}});
        }
        curves.push_back({{"method", c.method}, {"bins", bins}});
    }
    j = {{"accuracies", acc}, {"confusions", conf}, {"curves", curves}, {"config", r.config}, {"seed", r.seed}};
}

void from_json(const json& j, EvalReport& r) {
    r = EvalReport{};
    for (const auto& a : j.at("accuracies")) {
        r.accuracies.push_back({a.at("stage").get<std::string>(), a.at("correct").get<std::uint64_t>(),
                                a.at("total").get<std::uint64_t>()});
    }
    for (const auto& [stage, m] : j.at("confusions").items()) {
        const auto names = m.at("classes").get<std::vector<std::string>>();
        ConfusionMatrix cm(names.size(), names);
        const auto& counts = m.at("counts");
        for (std::size_t l = 0; l < names.size(); ++l) {
            for (std::size_t p = 0; p < names.size(); ++p) {
                cm.add(static_cast<int>(l), static_cast<int>(p), counts.at(l).at(p).get<std::uint64_t>());
            }
        }
        r.confusions.emplace(stage, std::move(cm));
    }
    for (const auto& c : j.at("curves")) {
        BerCurve curve;
        curve.method = c.at("method").get<std::string>();
        for (const auto& b : c.at("bins")) {
            curve.add(b.at("sps").get<int>(), b.at("sir_bin_db").get<int>(),
                      {b.at("errors").get<std::uint64_t>(), b.at("bits").get<std::uint64_t>()});
        }
        r.curves.push_back(std::move(curve));
    }
    r.config = j.value("config", json::object());
    r.seed = j.value("seed", std::uint64_t{0});
}

// ---- text artifacts ----------------------------------------------------------------

namespace {

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    out.flush();
    if (!out) throw IoError("write failed for " + path.string());
}

std::set<int> curve_sps(const EvalReport& r) {
    std::set<int> sps;
    for (const auto& c : r.curves) {
        for (const auto& [key, count] : c.bins) sps.insert(key.first);
    }
    return sps;
}

}  // namespace

std::string method_slug(const std::string& method) {
    std::string s;
    for (char ch : method) {
        if (std::isalnum(static_cast<unsigned char>(ch))) {
            s += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        } else if (!s.empty() && s.back() != '_') {
            s += '_';
        }
    }
    while (!s.empty() && s.back() == '_') s.pop_back();
    return s;
}

std::string accuracy_csv(const EvalReport& report) {
    std::string out = "stage,correct,total,accuracy\n";
    for (const auto& a : report.accuracies) {
        out += a.stage + "," + std::to_string(a.correct) + "," + std::to_string(a.total) + "," +
               fmt("%.6f", a.accuracy()) + "\n";
    }
    return out;
}

std::string confusion_csv(const ConfusionMatrix& m) {
    std::string out = "label,pred,count\n";
    for (std::size_t l = 0; l < m.classes(); ++l) {
        for (std::size_t p = 0; p < m.classes(); ++p) {
            out += m.class_names()[l] + "," + m.class_names()[p] + "," + std::to_string(m.count(l, p)) + "\n";
        }
    }
    return out;
}

std::string ber_csv(const BerCurve& curve) {
    std::string out = "method,sps,sir_bin_db,bits,errors,ber,floored\n";
    for (const auto& [key, c] : curve.bins) {
        if (c.bits == 0) continue;
        const bool floored = c.errors == 0;
        out += curve.method + "," + std::to_string(key.first) + "," + std::to_string(key.second) + "," +
               std::to_string(c.bits) + "," + std::to_string(c.errors) + "," +
               fmt("%.6e", floored ? kBerFloor : c.rate()) + "," + (floored ? "1" : "0") + "\n";
    }
    return out;
}

std::string ber_svg(const EvalReport& report, int sps) {
    constexpr double W = 640, H = 420, left = 70, right = 150, top = 40, bottom = 50;
    const double pw = W - left - right, ph = H - top - bottom;
    int sir_min = 0, sir_max = 0;
    bool any = false;
    for (const auto& c : report.curves) {
        for (const auto& [key, count] : c.bins) {
            if (key.first != sps || count.bits == 0) continue;
            sir_min = any ? std::min(sir_min, key.second) : key.second;
            sir_max = any ? std::max(sir_max, key.second) : key.second;
            any = true;
        }
    }
    if (!any || sir_max == sir_min) {
        sir_min = any ? sir_min - 1 : -10;
        sir_max = any ? sir_max + 1 : 10;
    }
    const double log_lo = std::log10(kBerFloor), log_hi = 0.0;
    auto x_of = [&](double sir) { return left + pw * (sir - sir_min) / (sir_max - sir_min); };
    auto y_of = [&](double ber) {
        const double l = std::clamp(std::log10(std::max(ber, kBerFloor)), log_lo, log_hi);
        return top + ph * (log_hi - l) / (log_hi - log_lo);
    };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << left + pw / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">BER vs SIR, interferer SPS " << sps << "</text>\n";
    for (int e = 0; e >= -6; --e) {
        const double y = y_of(std::pow(10.0, e));
        s << "<line x1=\"" << left << "\" y1=\"" << fmt("%.2f", y) << "\" x2=\"" << left + pw << "\" y2=\"" << fmt("%.2f", y)
          << "\" stroke=\"#ddd\"/>\n";
        s << "<text x=\"" << left - 6 << "\" y=\"" << fmt("%.2f", y + 4) << "\" text-anchor=\"end\">1e" << e << "</text>\n";
    }
    for (int sir = sir_min; sir <= sir_max; sir += std::max(1, (sir_max - sir_min) / 10)) {
        const double x = x_of(sir);
        s << "<line x1=\"" << fmt("%.2f", x) << "\" y1=\"" << top + ph << "\" x2=\"" << fmt("%.2f", x) << "\" y2=\""
          << top + ph + 4 << "\" stroke=\"black\"/>\n";
        s << "<text x=\"" << fmt("%.2f", x) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << sir << "</text>\n";
    }
    s << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    s << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">SIR (dB)</text>\n";
    s << "<text x=\"16\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << top + ph / 2
      << ")\">BER</text>\n";

    std::size_t ci = 0;
    for (const auto& c : report.curves) {
        const char* color = colors[ci % 5];
        std::string points;
        std::string markers;
        for (const auto& [key, count] : c.bins) {
            if (key.first != sps || count.bits == 0) continue;
            const bool floored = count.errors == 0;
            const double x = x_of(key.second), y = y_of(floored ? kBerFloor : count.rate());
            points += fmt("%.2f", x) + "," + fmt("%.2f", y) + " ";
            markers += "<circle cx=\"" + fmt("%.2f", x) + "\" cy=\"" + fmt("%.2f", y) + "\" r=\"3\" fill=\"" +
                       (floored ? std::string("white") : std::string(color)) + "\" stroke=\"" + color + "\"/>\n";
        }
        if (!points.empty()) {
            points.pop_back();
            s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"" << points << "\"/>\n";
            s << markers;
        }
        const double ly = top + 14 + 18.0 * static_cast<double>(ci);
        s << "<line x1=\"" << left + pw + 12 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 32 << "\" y2=\"" << ly
          << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        s << "<text x=\"" << left + pw + 38 << "\" y=\"" << ly + 4 << "\">" << c.method << "</text>\n";
        ++ci;
    }
    s << "<text x=\"" << left + pw + 12 << "\" y=\"" << top + 14 + 18.0 * static_cast<double>(ci) + 8
      << "\" font-size=\"10\">open marker: 0 errors</text>\n";
    s << "</svg>\n";
    return s.str();
}

std::vector<std::filesystem::path> emit_report(const EvalReport& report, const std::filesystem::path& out_dir,
                                               bool write_json) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create report directory " + out_dir.string() + ": " + ec.message());
    std::vector<std::filesystem::path> written;
    auto emit = [&](const std::string& name, const std::string& text) {
        const auto path = out_dir / name;
        write_file(path, text);
        written.push_back(path);
    };
    emit("accuracy.csv", accuracy_csv(report));
    for (const auto& [stage, m] : report.confusions) emit("confusion_" + method_slug(stage) + ".csv", confusion_csv(m));
    for (const auto& c : report.curves) emit("ber_" + method_slug(c.method) + ".csv", ber_csv(c));
    for (int sps : curve_sps(report)) emit("ber_sps" + std::to_string(sps) + ".svg", ber_svg(report, sps));
    if (write_json) emit("report.json", json(report).dump(2) + "\n");
    return written;
}

}  // namespace sicu
