// Acceptance run: one PASS/FAIL line per criterion. Criteria 4-8 drive the
// sicu command-line tool on fresh workspaces; 1-3 run in-process.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "nn_oracles.hpp"
#include "sicu/dsp.hpp"
#include "sicu/eval.hpp"
#include "sicu/nn/functional.hpp"
#include "sicu/nn/layers.hpp"
#include "sicu/pipeline.hpp"
#include "sicu/rng.hpp"
#include "sicu/scenario.hpp"
#include "sicu/sic.hpp"

using namespace sicu;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

class Clock {
public:
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

private:
    std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---- 1. DSP exactness ------------------------------------------------------------

Verdict dsp_exactness() {
    Clock clock;
    Rng rng(101);
    std::string detail;
    bool ok = true;
    for (int sps : {4, 16, 32}) {
        const auto shape = design_rrc(kDefaultRollOff, kDefaultSpanSymbols, sps);
        Bits bits(100000);
        for (auto& b : bits) b = static_cast<std::uint8_t>(rng.bit());
        const IqFrame tx = pulse_shape(qpsk_modulate(bits), shape);
        const auto soft = matched_filter_downsample(tx, shape, bits.size() / 2);
        const BerCount e = ber(bits, qpsk_hard_decision(soft));
        ok = ok && e.errors == 0 && e.bits >= 100000;
        detail += "sps" + std::to_string(sps) + " " + std::to_string(e.errors) + "/" + std::to_string(e.bits) + " errors; ";
    }
    double worst = 0.0;
    for (int draw = 0; draw < 1000; ++draw) {
        IqFrame a, b;
        const std::size_t n = 64 + rng.index(512);
        for (std::size_t i = 0; i < n; ++i) {
            a.samples.emplace_back(rng.gaussian(), rng.gaussian());
            b.samples.emplace_back(3.0 * rng.gaussian(), rng.gaussian());
        }
        const double sir = rng.uniform(-10.5, 10.5);
        const IqFrame m = mix_at_sir(a, b, sir);
        IqFrame intf = m;
        for (std::size_t i = 0; i < n; ++i) intf.samples[i] -= a.samples[i];
        const double ratio = measure_power(a) / measure_power(intf);
        worst = std::max(worst, std::abs(ratio / db_to_power_ratio(sir) - 1.0));
    }
    const double t = clock.seconds();
    ok = ok && worst < 1e-9 && t < 10.0;
    detail += "mix ratio max rel err " + fmt("%.2e", worst) + " over 1000 draws; " + fmt("%.1f s", t);
    return {ok, detail};
}

// ---- 2. NN correctness -----------------------------------------------------------

Verdict nn_correctness() {
    using namespace sicu::nn;
    Clock clock;
    Rng rng(202);
    double worst = 0.0;
    std::string where;
    auto check = [&](const std::string& name, Layer<double>& layer, Tensor<double> x) {
        const auto r = test::gradient_check(layer, std::move(x), rng);
        if (r.worst > worst) {
            worst = r.worst;
            where = name + "/" + r.where;
        }
    };
    {
        Conv1d<double> conv(3, 4, 5, 2, 2);
        test::randomize_params(conv, rng);
        check("conv1d", conv, test::random_tensor({4, 3, 16}, rng));
        Dense<double> dense(12, 4);
        test::randomize_params(dense, rng);
        check("dense", dense, test::random_tensor({4, 12}, rng));
        BatchNorm1d<double> bn(4);
        test::randomize_params(bn, rng);
        check("batchnorm", bn, test::random_tensor({4, 4, 16}, rng));
        ReLU<double> relu;
        check("relu", relu, test::offset_tensor({4, 4, 16}, rng));
        MaxPool1d<double> pool(4);
        check("maxpool", pool, test::random_tensor({4, 4, 16}, rng));
        Upsample2<double> up;
        check("upsample", up, test::random_tensor({4, 4, 8}, rng));
        Flatten<double> flat;
        check("flatten", flat, test::random_tensor({4, 4, 4}, rng));
        GlobalAvgPool1d<double> gap;
        check("global_avg_pool", gap, test::random_tensor({4, 4, 8}, rng));
        UNetConfig uc;
        uc.depth = 2;
        uc.base_channels = 3;
        uc.kernel = 3;
        UNet<double> unet(uc);
        test::randomize_params(unet, rng);
        check("unet", unet, test::random_tensor({2, 2, 16}, rng));
    }
    const double adam = test::adam_scalar_gap(100);
    double ce = 0.0;
    for (std::size_t k : {2u, 3u, 21u}) {
        Tensor<double> logits({3, k}, -0.7);
        ce = std::max(ce, std::abs(softmax_cross_entropy(logits, std::vector<int>{0, 1, 1}).loss -
                                   std::log(static_cast<double>(k))));
    }
    const double t = clock.seconds();
    const bool ok = worst < 1e-4 && adam < 1e-12 && ce < 1e-9 && t < 60.0;
    return {ok, "grad rel err max " + fmt("%.2e", worst) + " (" + where + "); adam gap " + fmt("%.1e", adam) +
                    "; CE-lnK gap " + fmt("%.1e", ce) + "; " + fmt("%.1f s", t)};
}

// ---- 3. SIC oracle power ---------------------------------------------------------

Verdict sic_oracle_power() {
    Clock clock;
    ScenarioConfig c;
    Rng rng(303);
    bool ok = true;
    double worst = 0.0;
    std::string detail;
    for (int sps : {32, 16, 4}) {
        for (double sir : {-10.0, -8.0, -6.0}) {
            BerCount total;
            while (total.bits < 10000) {
                const auto parts = generate_parts(c, sir, sps, rng);
                IqFrame m = parts.soi;
                for (std::size_t n = 0; n < m.size(); ++n) m.samples[n] += parts.interferer.samples[n];
                total += ber(parts.soi_bits, sic_cancel(m, make_sic_config(c, sps, sir)).soi_bits);
            }
            worst = std::max(worst, total.rate());
            ok = ok && total.rate() <= 1e-3;
            detail += std::to_string(sps) + "/" + fmt("%g", sir) + "dB:" + std::to_string(total.errors) + "/" +
                      std::to_string(total.bits) + " ";
        }
    }
    const double t = clock.seconds();
    ok = ok && t < 120.0;
    return {ok, "worst BER " + fmt("%.2e", worst) + "; " + detail + fmt("; %.1f s", t)};
}

// ---- CLI studies -----------------------------------------------------------------

struct Study {
    fs::path workspace;
    bool ok = false;
    std::string failure;
    std::map<std::string, double> step_seconds;
    double total_seconds = 0.0;

    json report() const { return json::parse(slurp(workspace / "reports" / "report.json")); }
    json run_config() const { return json::parse(slurp(workspace / "reports" / "manifest.json")).at("run_config"); }
};

class StudyRunner {
public:
    StudyRunner(std::string cli, fs::path root, std::uint64_t seed, bool reuse)
        : cli_(std::move(cli)), root_(std::move(root)), seed_(seed), reuse_(reuse) {}

    const Study& get(const std::string& name, const std::string& profile) {
        auto it = studies_.find(name);
        if (it != studies_.end()) return it->second;
        Study s;
        s.workspace = root_ / name;
        const fs::path timing = s.workspace / "acceptance_timing.json";
        if (reuse_ && fs::exists(s.workspace / "reports" / "report.json") && fs::exists(timing)) {
            const json t = json::parse(slurp(timing));
            s.step_seconds = t.at("steps").get<std::map<std::string, double>>();
            s.total_seconds = t.at("total").get<double>();
            s.ok = true;
            std::cout << "  reusing study " << s.workspace << "\n" << std::flush;
            return studies_.emplace(name, std::move(s)).first->second;
        }
        fs::remove_all(s.workspace);
        fs::create_directories(s.workspace);
        const std::vector<std::string> steps{"generate",         "train --stage sps", "train --stage sir",
                                             "train --stage unet", "labels",          "train --stage method",
                                             "evaluate"};
        s.ok = true;
        for (const auto& step : steps) {
            Clock clock;
            const std::string log = (s.workspace / "cli.log").string();
            const std::string cmd = cli_ + " --workspace " + s.workspace.string() + " --profile " + profile +
                                    " --seed " + std::to_string(seed_) + " " + step + " >>" + log + " 2>&1";
            std::cout << "  [" << name << "] sicu " << step << " ... " << std::flush;
            const int status = std::system(cmd.c_str());
            const double secs = clock.seconds();
            s.step_seconds[step] = secs;
            s.total_seconds += secs;
            std::cout << fmt("%.1f s", secs) << "\n" << std::flush;
            if (status != 0) {
                s.ok = false;
                s.failure = "`sicu " + step + "` exited with status " + std::to_string(status) + " (see " + log + ")";
                break;
            }
        }
        if (s.ok) {
            std::ofstream(timing) << json{{"steps", s.step_seconds}, {"total", s.total_seconds}}.dump(2) << "\n";
        }
        return studies_.emplace(name, std::move(s)).first->second;
    }

private:
    std::string cli_;
    fs::path root_;
    std::uint64_t seed_;
    bool reuse_;
    std::map<std::string, Study> studies_;
};

double accuracy_of(const json& report, const std::string& stage) {
    for (const auto& a : report.at("accuracies")) {
        if (a.at("stage") == stage) {
            const double total = a.at("total").get<double>();
            return total > 0 ? a.at("correct").get<double>() / total : 0.0;
        }
    }
    throw std::runtime_error("report lacks stage accuracy " + stage);
}

Verdict stage1_floor(StudyRunner& runner) {
    const Study& s = runner.get("integer_a", "integer_sir");
    if (!s.ok) return {false, s.failure};
    const json rc = s.run_config();
    const auto per_cell = rc.at("scenario").at("examples_per_bin").get<std::size_t>();
    const std::size_t per_class = per_cell * rc.at("scenario").at("sir_bins_db").size();
    const double acc = accuracy_of(s.report(), "stage1_sps");
    const double secs = s.step_seconds.at("train --stage sps");
    const bool ok = acc >= 0.90 && per_class >= 300 && secs < 1200.0;
    return {ok, "held-out SPS accuracy " + fmt("%.4f", acc) + " (floor 0.90); " + std::to_string(per_class) +
                    " training examples/class; training " + fmt("%.0f s", secs)};
}

Verdict stage2_floor(StudyRunner& runner) {
    const Study& s = runner.get("integer_a", "integer_sir");
    if (!s.ok) return {false, s.failure};
    const json r = s.report();
    const double within = accuracy_of(r, "stage2_sir_within_1");
    const double exact = accuracy_of(r, "stage2_sir");
    return {within >= 0.80, "held-out SIR within +-1 bin " + fmt("%.4f", within) + " (floor 0.80); exact bin " +
                                fmt("%.4f", exact)};
}

Verdict fractional_robustness(StudyRunner& runner) {
    const Study& a = runner.get("integer_a", "integer_sir");
    const Study& f = runner.get("fractional", "fractional_sir");
    if (!a.ok) return {false, a.failure};
    if (!f.ok) return {false, f.failure};
    const json ra = a.report(), rf = f.report();
    const double s_int = accuracy_of(ra, "stage1_sps"), s_frac = accuracy_of(rf, "stage1_sps");
    const double drop = s_int - s_frac;
    const double within = accuracy_of(rf, "stage2_sir_within_1");
    const double e_int = accuracy_of(ra, "stage2_sir"), e_frac = accuracy_of(rf, "stage2_sir");
    const bool fractional = f.run_config().at("scenario").at("fractional_offsets").get<bool>();
    const bool ok = fractional && drop <= 0.05 && within >= 0.75;
    return {ok, "Stage-1 " + fmt("%.4f", s_int) + " -> " + fmt("%.4f", s_frac) + " (drop " + fmt("%.2f", 100 * drop) +
                    " points, limit 5); Stage-2 exact " + fmt("%.4f", e_int) + " -> " + fmt("%.4f", e_frac) +
                    "; fractional within +-1 " + fmt("%.4f", within) + " (floor 0.75)"};
}

Verdict recommender_dominance(StudyRunner& runner) {
    const Study& s = runner.get("integer_a", "integer_sir");
    if (!s.ok) return {false, s.failure};
    const fs::path ws = s.workspace;

    // Part 1: oracle Stages 1-2 and ground-truth Stage 3 on the label set.
    const auto pipeline = RecommenderPipeline::from_manifest(ws / "checkpoints" / "pipeline.json");
    const Dataset train = read_dataset(ws / "datasets" / "train.sicu");
    const auto truth = json::parse(slurp(ws / "datasets" / "method_labels.json")).at("ground_truth").get<MethodGroundTruth>();
    EvalOptions opt;
    opt.oracle_sps = opt.oracle_sir = opt.oracle_method = true;
    opt.ground_truth = &truth;
    const EvalReport oracle = evaluate_pipeline(pipeline, train, opt);
    const BerCurve& full = *oracle.curve(kFullCurve);
    const BerCurve& sic = *oracle.curve(kSicCurve);
    const BerCurve& unet = *oracle.curve(kUnetCurve);
    BerCurve best{"best", {}};
    for (const auto& o : truth.outcomes) best.add(o.sps, o.sir_bin_db, o.sic.errors < o.unet.errors ? o.sic : o.unet);
    std::size_t bins = 0, literal = 0, bounded = 0;
    for (const auto& [key, f] : full.bins) {
        ++bins;
        const auto m = std::min(sic.bins.at(key).errors, unet.bins.at(key).errors);
        literal += f.errors == m;
        bounded += f.errors <= m;
    }
    const bool part1 = full.bins == best.bins && bounded == bins;

    // Part 2: all stages predicted, held-out data.
    const EvalReport held = s.report().get<EvalReport>();
    const BerCurve& hf = *held.curve(kFullCurve);
    const BerCurve& hs = *held.curve(kSicCurve);
    const BerCurve& hu = *held.curve(kUnetCurve);
    std::size_t eligible = 0, within = 0;
    double worst_ratio = 0.0;
    std::string worst_bin, misses;
    for (const auto& [key, f] : hf.bins) {
        if (f.bits < 10000) continue;
        ++eligible;
        const double m = std::min(hs.bins.at(key).rate(), hu.bins.at(key).rate());
        const bool hit = f.rate() <= 1.25 * m;
        within += hit;
        const double ratio = m > 0 ? f.rate() / m : (f.errors ? INFINITY : 1.0);
        if (!hit) {
            misses += " (" + std::to_string(key.first) + "," + std::to_string(key.second) + "dB: " +
                      fmt("%.2e", f.rate()) + " vs " + fmt("%.2e", m) + ")";
        }
        if (ratio > worst_ratio) {
            worst_ratio = ratio;
            worst_bin = std::to_string(key.first) + "/" + std::to_string(key.second) + "dB";
        }
    }
    const bool part2 = eligible > 0 && within == eligible;
    std::string detail = "oracle ablation on label set: Full == per-example best in all bins: " +
                         std::string(full.bins == best.bins ? "yes" : "no") + ", Full <= min(SIC, UNet) in " +
                         std::to_string(bounded) + "/" + std::to_string(bins) + " bins (equal to the bin-level min in " +
                         std::to_string(literal) + "); held-out predicted stages: " + std::to_string(within) + "/" +
                         std::to_string(eligible) + " bins with >=1e4 bits within 1.25x, worst ratio " +
                         fmt("%.2f", worst_ratio) + " at " + worst_bin;
    if (!misses.empty()) detail += "; misses:" + misses;
    return {part1 && part2, detail};
}

Verdict end_to_end(StudyRunner& runner) {
    const Study& a = runner.get("integer_a", "integer_sir");
    const Study& b = runner.get("integer_b", "integer_sir");
    if (!a.ok) return {false, a.failure};
    if (!b.ok) return {false, b.failure};
    const json rc = a.run_config();
    const auto& sc = rc.at("scenario");
    const std::size_t bins = sc.at("sir_bins_db").size(), nsps = sc.at("interferer_sps_set").size();
    const auto test_per = rc.at("test_examples_per_bin").get<std::size_t>();
    const auto train_per = sc.at("examples_per_bin").get<std::size_t>();
    const std::size_t min_class = std::min(train_per * bins, train_per * nsps);
    std::size_t files = 0, same = 0;
    std::string differing;
    for (const auto& e : fs::directory_iterator(a.workspace / "reports")) {
        ++files;
        const fs::path other = b.workspace / "reports" / e.path().filename();
        if (fs::exists(other) && slurp(e.path()) == slurp(other)) {
            ++same;
        } else {
            differing += " " + e.path().filename().string();
        }
    }
    const bool shape = bins == 21 && nsps == 3 && test_per == 20 && min_class >= 100;
    const bool ok = shape && files > 0 && same == files && a.total_seconds < 3600 && b.total_seconds < 3600;
    std::string detail = std::to_string(bins) + " bins x " + std::to_string(nsps) + " sps x " +
                         std::to_string(test_per) + " test, >=" + std::to_string(min_class) +
                         " training examples/class; runs " + fmt("%.0f s", a.total_seconds) + " and " +
                         fmt("%.0f s", b.total_seconds) + "; " + std::to_string(same) + "/" + std::to_string(files) +
                         " report files byte-identical";
    if (!differing.empty()) detail += "; differ:" + differing;
    return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::vector<int> only;
    std::string workdir = (fs::temp_directory_path() / "sicu_acceptance").string();
    std::string cli = SICU_CLI_PATH;
    std::uint64_t seed = 1;
    bool reuse = false;
    app.add_option("criteria", only, "Criteria to run (default: all)")->check(CLI::Range(1, 8));
    app.add_option("--workdir", workdir, "Directory for the CLI study workspaces");
    app.add_option("--cli", cli, "Path to the sicu binary");
    app.add_option("--seed", seed, "Seed for the CLI studies");
    app.add_flag("--reuse", reuse, "Reuse completed study workspaces from an earlier run");
    CLI11_PARSE(app, argc, argv);

    StudyRunner runner(cli, workdir, seed, reuse);
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"DSP exactness", dsp_exactness},
        {"NN correctness", nn_correctness},
        {"SIC oracle power", sic_oracle_power},
        {"Stage-1 desk-scale floor", [&] { return stage1_floor(runner); }},
        {"Stage-2 desk-scale floor", [&] { return stage2_floor(runner); }},
        {"Fractional robustness", [&] { return fractional_robustness(runner); }},
        {"Recommender dominance", [&] { return recommender_dominance(runner); }},
        {"End-to-end smoke", [&] { return end_to_end(runner); }},
    };

    std::vector<std::string> lines;
    bool all = true;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        std::cout << "criterion " << id << ": " << criteria[i].first << "\n" << std::flush;
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("error: ") + e.what()};
        }
        all = all && v.pass;
        std::string line = (v.pass ? "PASS" : "FAIL") + std::string(" criterion ") + std::to_string(id) + " (" +
                           criteria[i].first + "): " + v.detail;
        std::cout << line << "\n" << std::flush;
        lines.push_back(std::move(line));
    }
    std::cout << "\nsummary\n";
    for (const auto& l : lines) std::cout << l << "\n";
    return all ? 0 : 1;
}
