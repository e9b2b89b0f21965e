#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <omp.h>

#include "pgan/cli.hpp"
#include "pgan/errors.hpp"

using namespace pgan;

namespace {

void apply_thread_cap() {
    if (const char* env = std::getenv("PGAN_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) omp_set_num_threads(n);
    }
}

struct CommonFlags {
    std::string config_path;
    std::string out_dir = "out";
    long seed = -1;
    double lambda = -1.0;
    int d = -1;
    std::string metric, protocol;

    AppConfig resolve() const {
        AppConfig cfg = config_path.empty() ? AppConfig{} : load_config_file(config_path);
        if (seed >= 0) {
            cfg.train.seed = static_cast<std::uint64_t>(seed);
            cfg.synth.seed = static_cast<std::uint64_t>(seed);
        }
        if (lambda >= 0.0) cfg.train.lambda = lambda;
        if (d > 0) cfg.train.d = d;
        if (!metric.empty()) cfg.metric = metric;
        if (!protocol.empty()) cfg.protocol = protocol;
        return cfg;
    }
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "key=value config file");
    cmd->add_option("--out", flags.out_dir, "output directory");
    cmd->add_option("--seed", flags.seed, "root seed override");
    cmd->add_option("--lambda", flags.lambda, "cross-entropy loss weight");
    cmd->add_option("--d", flags.d, "part count D");
    cmd->add_option("--metric", flags.metric, "euclidean|cosine");
    cmd->add_option("--protocol", flags.protocol, "veri|vehicleid");
}

} // namespace

int main(int argc, char** argv) {
    apply_thread_cap();

    CLI::App app{"Part-guided attention instance retrieval, desk scale"};
    app.require_subcommand(1);

    CommonFlags gen_flags, train_flags, eval_flags, att_flags, abl_flags;
    std::string data_dir, checkpoint, variant = "pgan", resume, proposals;
    std::string variants_csv = "pgan", ds_csv, lambdas_csv;
    int ablate_seeds = 1;

    auto* gen = app.add_subcommand("generate", "synthesize a dataset");
    add_common(gen, gen_flags);

    auto* tr = app.add_subcommand("train", "train a variant");
    add_common(tr, train_flags);
    tr->add_option("--data", data_dir, "dataset directory")->required();
    tr->add_option("--variant", variant, "baseline|grid|pgan_uniform|pgan");
    tr->add_option("--resume", resume, "checkpoint to resume from");
    tr->add_option("--proposals", proposals, "proposal cache path (read or write)");

    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common(ev, eval_flags);
    ev->add_option("--data", data_dir, "dataset directory")->required();
    ev->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();

    auto* att = app.add_subcommand("attention-report",
                                   "export attention weights and heatmaps");
    add_common(att, att_flags);
    att->add_option("--data", data_dir, "dataset directory")->required();
    att->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();

    auto* abl = app.add_subcommand("ablate", "run a variant/setting matrix");
    add_common(abl, abl_flags);
    abl->add_option("--data", data_dir, "dataset directory")->required();
    abl->add_option("--variants", variants_csv, "comma list of variants");
    abl->add_option("--ds", ds_csv, "comma list of part counts");
    abl->add_option("--lambdas", lambdas_csv, "comma list of loss weights");
    abl->add_option("--seeds", ablate_seeds, "seed replicas per cell");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_generate(gen_flags.resolve(), gen_flags.out_dir);
        if (tr->parsed())
            return cmd_train(train_flags.resolve(), variant, data_dir,
                             train_flags.out_dir, resume, proposals);
        if (ev->parsed())
            return cmd_eval(eval_flags.resolve(), checkpoint, data_dir,
                            eval_flags.out_dir);
        if (att->parsed())
            return cmd_attention_report(att_flags.resolve(), checkpoint, data_dir,
                                        att_flags.out_dir);
        if (abl->parsed()) {
            AblateAxes axes;
            axes.seeds = ablate_seeds;
            axes.variants.clear();
            auto split_csv = [](const std::string& s) {
                std::vector<std::string> out;
                std::string cur;
                for (char ch : s) {
                    if (ch == ',') {
                        if (!cur.empty()) out.push_back(cur);
                        cur.clear();
                    } else {
                        cur.push_back(ch);
                    }
                }
                if (!cur.empty()) out.push_back(cur);
                return out;
            };
            axes.variants = split_csv(variants_csv);
            for (const auto& t : split_csv(ds_csv)) axes.d_values.push_back(std::stoi(t));
            for (const auto& t : split_csv(lambdas_csv))
                axes.lambda_values.push_back(std::stod(t));
            return cmd_ablate(abl_flags.resolve(), axes, data_dir, abl_flags.out_dir);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
