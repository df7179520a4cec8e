// occgrasp command line: dataset generation, labelling, balancing, evaluation
// and reports. Every output is stamped with the config and master seed.
#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "occgrasp/bench.hpp"
#include "occgrasp/error.hpp"

namespace fs = std::filesystem;
using namespace occgrasp;

namespace {

void write_stamp(const fs::path& path, const nlohmann::json& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

nlohmann::json bins_json(const std::vector<BinResult>& bins) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& b : bins) {
        nlohmann::json row = {{"bin", b.bin}, {"label", b.label}, {"trials", b.trials}, {"successes", b.successes}};
        row["gsr"] = b.gsr ? nlohmann::json(*b.gsr) : nlohmann::json(nullptr);
        a.push_back(row);
    }
    return a;
}

BinScheme scheme_for(int bins) {
    if (bins == 9) return BinScheme::test();
    if (bins == 10) return BinScheme::train();
    throw InputError("--bins must be 9 (test edges) or 10 (train edges)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"occgrasp: occlusion-binned grasping benchmark"};
    app.require_subcommand(1);
    const fs::path root = default_output_root();

    // generate
    auto* gen = app.add_subcommand("generate", "build a dataset of binned (cluttered scene, target) samples");
    DatasetConfig dc;
    int bins = 9;
    fs::path gen_out = root / "dataset";
    bool no_targeted = false;
    gen->add_option("--out", gen_out, "dataset directory");
    gen->add_option("--split", dc.split, "train or test")->check(CLI::IsMember({"train", "test"}));
    gen->add_option("--bins", bins, "9 (test edges) or 10 (train edges)");
    gen->add_option("--per-bin", dc.per_bin, "samples per bin; 0 disables quotas");
    gen->add_option("--scenes", dc.scene_count, "random scenes when quotas are off");
    gen->add_option("--random-scenes", dc.random_scenes, "random scenes tried before targeted placement");
    gen->add_option("--max-attempts", dc.max_attempts_per_bin, "targeted attempts per bin");
    gen->add_flag("--no-targeted", no_targeted, "random placement only");
    gen->add_option("--grasps", dc.grasps_per_sample, "labelled grasps per sample");
    gen->add_flag("--single-frames", dc.write_single_frames, "also store each target's single-scene frame");
    gen->add_option("--seed", dc.seed, "master seed");
    gen->add_option("--workers", dc.workers, "threads (0 = all cores)");

    // label
    auto* lab = app.add_subcommand("label", "relabel every sample of a dataset");
    fs::path lab_dataset = root / "dataset";
    int lab_grasps = 350;
    unsigned lab_workers = 1;
    lab->add_option("--dataset", lab_dataset);
    lab->add_option("--grasps", lab_grasps);
    lab->add_option("--workers", lab_workers);

    // balance
    auto* bal = app.add_subcommand("balance", "subsample negatives to the positive count");
    fs::path bal_dataset = root / "dataset", bal_out = root / "balanced.jsonl";
    bool bal_per_bin = false;
    std::string bal_context = "single";
    std::uint64_t bal_seed = 0;
    bal->add_option("--dataset", bal_dataset);
    bal->add_option("--out", bal_out);
    bal->add_flag("--per-bin", bal_per_bin, "balance each occlusion bin separately");
    bal->add_option("--context", bal_context, "single or cluttered")->check(CLI::IsMember({"single", "cluttered"}));
    bal->add_option("--seed", bal_seed);

    // eval
    auto* ev = app.add_subcommand("eval", "closed-loop evaluation on the test split");
    fs::path ev_dataset = root / "dataset", ev_out = root / "eval";
    std::string policy = "oracle", completer = "oracle";
    EvalConfig ec;
    ev->add_option("--dataset", ev_dataset);
    ev->add_option("--out", ev_out, "directory for eval.csv, outcomes.csv and eval.json");
    ev->add_option("--policy", policy)->check(CLI::IsMember({"oracle", "random"}));
    ev->add_option("--completer", completer)->check(CLI::IsMember({"oracle", "mirror", "passthrough"}));
    ev->add_option("--trials-per-bin", ec.trials_per_bin);
    ev->add_option("--noise", ec.noise_sigma, "depth noise sigma in meters");
    ev->add_option("--seed", ec.seed);
    ev->add_option("--workers", ec.workers);

    // analyze
    auto* an = app.add_subcommand("analyze", "GSR by occluder count and target size");
    fs::path an_in, an_out = root / "factors";
    an->add_option("--outcomes", an_in, "outcomes.csv from eval")->required();
    an->add_option("--out", an_out);

    // complete-eval
    auto* ce = app.add_subcommand("complete-eval", "CD-l1 and voxel IoU of the completers");
    fs::path ce_dataset = root / "dataset", ce_out = root / "completion.csv";
    CompletionEvalConfig cc;
    ce->add_option("--dataset", ce_dataset);
    ce->add_option("--out", ce_out);
    ce->add_option("--completers", cc.completers)->check(CLI::IsMember({"oracle", "mirror", "passthrough"}));
    ce->add_option("--per-bin", cc.samples_per_bin, "samples per bin; 0 uses all");
    ce->add_option("--voxel", cc.voxel_size);
    ce->add_option("--workers", cc.workers);

    // report
    auto* rep = app.add_subcommand("report", "GSR-vs-occlusion curve and summary table");
    std::vector<std::string> rep_inputs;
    fs::path rep_out = root / "report";
    rep->add_option("--eval", rep_inputs, "eval.csv files, optionally name=path")->required();
    rep->add_option("--out", rep_out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (*gen) {
            dc.bins = scheme_for(bins);
            dc.targeted_placement = !no_targeted;
            const Dataset d = build_dataset(dc, gen_out);
            const auto counts = d.bin_counts();
            std::printf("dataset %s: %zu samples in %zu scenes\n", gen_out.c_str(), d.samples.size(), d.scenes.size());
            for (int b = 0; b < static_cast<int>(counts.size()); ++b)
                std::printf("  bin %-12s %d%s\n", dc.bins.label(b).c_str(), counts[b],
                            d.shortfall.empty() || d.shortfall[b] == 0
                                ? ""
                                : (" (short " + std::to_string(d.shortfall[b]) + ")").c_str());
            for (int s : d.shortfall)
                if (s > 0) {
                    std::fprintf(stderr, "warning: quota not met, see shortfall in index.json\n");
                    break;
                }
        } else if (*lab) {
            Dataset d = load_dataset(lab_dataset);
            label_dataset(d, lab_grasps, lab_workers);
            std::printf("labelled %zu samples\n", d.samples.size());
        } else if (*bal) {
            const Dataset d = load_dataset(bal_dataset);
            std::vector<BinnedLabel> labels;
            for (const auto& s : d.samples)
                for (const auto& l : load_sample_labels(d, s)) labels.push_back({l, s.occlusion.bin_index});
            const auto context = bal_context == "single" ? LabelContext::Single : LabelContext::Cluttered;
            const BalanceReport r = balance_grasps(labels, bal_per_bin, context, bal_seed);
            if (bal_out.has_parent_path()) fs::create_directories(bal_out.parent_path());
            std::ofstream out(bal_out);
            if (!out) throw IoError("cannot write " + bal_out.string());
            for (const auto& l : r.labels) {
                auto j = label_to_json("", 0, l.label);
                j.erase("scene_id");
                j.erase("target_index");
                j["bin"] = l.bin;
                out << j.dump() << '\n';
            }
            nlohmann::json stamp = {{"dataset", dataset_config_to_json(d.config)},
                                    {"per_bin", bal_per_bin},
                                    {"context", bal_context},
                                    {"seed", bal_seed},
                                    {"input_labels", labels.size()},
                                    {"warnings", r.warnings}};
            for (const auto& [k, n] : r.positives) {
                stamp["counts"][std::to_string(k)] = {{"positives", n}, {"negatives", r.negatives.at(k)}};
                std::printf("bin %d: %zu positive, %zu negative\n", k, n, r.negatives.at(k));
            }
            write_stamp(fs::path(bal_out.string() + ".json"), stamp);
            for (const auto& w : r.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
        } else if (*ev) {
            const Dataset d = load_dataset(ev_dataset);
            const Policy p = policy == "random" ? make_random_policy(ec.seed)
                                                : make_oracle_policy(default_camera(d.config.workspace_extent), completer);
            const std::string name = policy == "random" ? "random" : policy + "+" + completer;
            EvalReport r = evaluate_policy(p, name, d, ec);
            r.config["completer"] = completer;
            write_eval_csv(ev_out / "eval.csv", r);
            write_outcomes_csv(ev_out / "outcomes.csv", r.outcomes);
            write_stamp(ev_out / "eval.json", {{"config", r.config}, {"seed", r.seed}, {"bins", bins_json(r.bins)}});
            for (const auto& b : r.bins)
                std::printf("bin %-12s trials %3zu gsr %s\n", b.label.c_str(), b.trials,
                            b.gsr ? std::to_string(*b.gsr).c_str() : "-");
        } else if (*an) {
            const FactorTables t = analyze_factors(read_outcomes_csv(an_in));
            write_factor_csvs(an_out, t);
            std::printf("wrote %s\n", an_out.c_str());
        } else if (*ce) {
            const Dataset d = load_dataset(ce_dataset);
            const auto rows = evaluate_completion(d, cc);
            write_completion_csv(ce_out, rows);
            std::map<std::string, std::pair<double, double>> sums;
            std::map<std::string, int> n;
            for (const auto& r : rows) {
                sums[r.completer].first += r.cd_l1_x1000;
                sums[r.completer].second += r.iou_pct;
                ++n[r.completer];
            }
            for (const auto& [name, s] : sums)
                std::printf("%-12s CD-l1 x1000 %.3f  IoU %.2f%%\n", name.c_str(), s.first / n[name], s.second / n[name]);
        } else if (*rep) {
            std::vector<std::pair<std::string, std::vector<BinResult>>> series;
            for (const auto& in : rep_inputs) {
                const auto eq = in.find('=');
                const std::string name = eq == std::string::npos ? fs::path(in).parent_path().filename().string()
                                                                 : in.substr(0, eq);
                series.emplace_back(name, read_eval_csv(eq == std::string::npos ? in : in.substr(eq + 1)));
            }
            std::size_t bin_rows = 0;
            for (const auto& s : series) bin_rows = std::max(bin_rows, s.second.size());
            const BinScheme scheme = bin_rows == 10 ? BinScheme::train() : BinScheme::test();
            write_gsr_plot_png(rep_out / "gsr_curve.png", series, scheme);
            fs::create_directories(rep_out);
            std::ofstream out(rep_out / "summary.csv");
            if (!out) throw IoError("cannot write summary.csv");
            out.precision(17);
            out << "series,bin,label,trials,successes,gsr\n";
            for (const auto& [name, rows] : series)
                for (const auto& b : rows)
                {
                    out << name << ',' << b.bin << ",\"" << b.label << "\"," << b.trials << ',' << b.successes << ',';
                    if (b.gsr) out << *b.gsr;
                    out << '\n';
                }
            for (const auto& [name, rows] : series) {
                std::printf("%s:", name.c_str());
                for (const auto& b : rows) std::printf(" %s", b.gsr ? std::to_string(*b.gsr).substr(0, 5).c_str() : "-");
                std::printf("\n");
            }
            std::printf("wrote %s\n", (rep_out / "gsr_curve.png").c_str());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
