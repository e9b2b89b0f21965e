#include "pgan/cli.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "pgan/checkpoint.hpp"
#include "pgan/errors.hpp"
#include "pgan/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace pgan {

namespace {

std::string iso_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

/// One line per run, append-only.
struct RunManifest {
    std::string command;
    const AppConfig* cfg;
    std::string out_dir;
    std::string started = iso_now();
    std::vector<std::string> outputs;

    void finish() const {
        fs::create_directories(out_dir);
        json j;
        j["command"] = command;
        j["config"] = json::parse(config_to_json_string(*cfg));
        j["seed"] = cfg->train.seed;
        j["version"] = kVersion;
        j["started"] = started;
        j["finished"] = iso_now();
        j["outputs"] = outputs;
        std::ofstream f(out_dir + "/runs.jsonl", std::ios::app);
        f << j.dump() << "\n";
    }
};

Dataset load_test_split(const AppConfig& cfg, const std::string& data_dir) {
    Dataset full = load_dataset(data_dir);
    Dataset train, test;
    split_train_test(full, cfg.train_frac, train, test);
    return test;
}

DetectorNoise eval_noise(const AppConfig& cfg) {
    DetectorNoise noise = cfg.detector;
    noise.seed = derive_seed(cfg.train.seed, 0xdeadULL, noise.seed);
    return noise;
}

} // namespace

int cmd_generate(const AppConfig& cfg, const std::string& out_dir) {
    RunManifest manifest{"generate", &cfg, out_dir};
    generate_to_dir(cfg.synth, out_dir);
    manifest.outputs = {out_dir + "/manifest.tsv", out_dir + "/synth_meta.json"};
    manifest.finish();
    std::cout << "generated " << cfg.synth.num_ids << " ids x "
              << cfg.synth.images_per_id << " images under " << out_dir << "\n";
    return 0;
}

int cmd_train(const AppConfig& cfg, const std::string& variant,
              const std::string& data_dir, const std::string& out_dir,
              const std::string& resume, const std::string& proposals) {
    RunManifest manifest{"train", &cfg, out_dir};

    Dataset full = load_dataset(data_dir);
    Dataset train_ds, test_ds;
    split_train_test(full, cfg.train_frac, train_ds, test_ds);

    TrainOptions opts;
    opts.variant = parse_variant(variant);
    opts.cfg = cfg.train;
    opts.detector = cfg.detector;
    opts.img_h = train_ds.samples.front().pixels.h;
    opts.img_w = train_ds.samples.front().pixels.w;
    opts.img_ch = train_ds.samples.front().pixels.ch;
    opts.out_dir = out_dir;
    opts.resume_checkpoint = resume;
    opts.proposal_cache = proposals;

    TrainResult result = train(train_ds, opts);
    manifest.outputs = {result.checkpoint_path, result.loss_log_path};
    manifest.finish();
    std::cout << "checkpoint: " << result.checkpoint_path << "\n";
    return 0;
}

MetricsReport evaluate_checkpoint(const AppConfig& cfg,
                                  const std::string& checkpoint,
                                  const Dataset& test) {
    PganModel model;
    load_model(checkpoint, model);
    if (!test.samples.empty()) {
        const auto& px = test.samples.front().pixels;
        if (px.h != model.config.img_h || px.w != model.config.img_w ||
            px.ch != model.config.img_ch)
            throw ShapeError("eval: dataset geometry does not match checkpoint");
    }

    std::vector<ProposalSet> proposals;
    if (model.config.uses_parts() && model.config.variant != Variant::grid)
        proposals = dataset_proposals(test, eval_noise(cfg), model.config.d,
                                      model.config.feat_h(), model.config.feat_w());
    Mat emb = embed_dataset(model, test, proposals);

    const Metric metric = parse_metric(cfg.metric);
    if (cfg.protocol == "veri") {
        RetrievalProtocol proto = split_protocol(test, ProtocolKind::veri, 0);
        Mat q(static_cast<int>(proto.query_index.size()), emb.cols);
        Mat g(static_cast<int>(proto.gallery_index.size()), emb.cols);
        for (std::size_t i = 0; i < proto.query_index.size(); ++i)
            std::copy(emb.row(proto.query_index[i]),
                      emb.row(proto.query_index[i]) + emb.cols, q.row(static_cast<int>(i)));
        for (std::size_t i = 0; i < proto.gallery_index.size(); ++i)
            std::copy(emb.row(proto.gallery_index[i]),
                      emb.row(proto.gallery_index[i]) + emb.cols, g.row(static_cast<int>(i)));
        return evaluate(proto, q, g, metric, cfg.cmc_k);
    }
    if (cfg.protocol != "vehicleid")
        throw ConfigError("unknown protocol '" + cfg.protocol + "'");

    std::vector<MetricsReport> reports;
    for (int s = 0; s < cfg.vehicleid_repeats; ++s) {
        RetrievalProtocol proto =
            split_protocol(test, ProtocolKind::vehicleid, static_cast<std::uint64_t>(s));
        Mat q(static_cast<int>(proto.query_index.size()), emb.cols);
        Mat g(static_cast<int>(proto.gallery_index.size()), emb.cols);
        for (std::size_t i = 0; i < proto.query_index.size(); ++i)
            std::copy(emb.row(proto.query_index[i]),
                      emb.row(proto.query_index[i]) + emb.cols, q.row(static_cast<int>(i)));
        for (std::size_t i = 0; i < proto.gallery_index.size(); ++i)
            std::copy(emb.row(proto.gallery_index[i]),
                      emb.row(proto.gallery_index[i]) + emb.cols, g.row(static_cast<int>(i)));
        reports.push_back(evaluate(proto, q, g, metric, cfg.cmc_k));
    }
    return aggregate_reports(reports);
}

int cmd_eval(const AppConfig& cfg, const std::string& checkpoint,
             const std::string& data_dir, const std::string& out_dir) {
    RunManifest manifest{"eval", &cfg, out_dir};
    fs::create_directories(out_dir);

    Dataset test = load_test_split(cfg, data_dir);
    MetricsReport report = evaluate_checkpoint(cfg, checkpoint, test);

    {
        std::ofstream f(out_dir + "/report.json");
        f << report.to_json() << "\n";
    }
    {
        std::ofstream f(out_dir + "/report.csv");
        f << "protocol,metric,mAP,top1,top5\n" << report.csv_row() << "\n";
    }

    // embedding export for downstream analysis
    PganModel model;
    load_model(checkpoint, model);
    std::vector<ProposalSet> proposals;
    if (model.config.uses_parts() && model.config.variant != Variant::grid)
        proposals = dataset_proposals(test, eval_noise(cfg), model.config.d,
                                      model.config.feat_h(), model.config.feat_w());
    Mat emb = embed_dataset(model, test, proposals);
    export_embeddings(out_dir + "/embeddings", emb, "fused_bn",
                      file_fnv1a(checkpoint));

    manifest.outputs = {out_dir + "/report.json", out_dir + "/report.csv",
                        out_dir + "/embeddings.f32"};
    manifest.finish();
    std::cout << report.csv_row() << "\n";
    return 0;
}

int cmd_attention_report(const AppConfig& cfg, const std::string& checkpoint,
                         const std::string& data_dir, const std::string& out_dir) {
    RunManifest manifest{"attention-report", &cfg, out_dir};
    fs::create_directories(out_dir);
    fs::create_directories(out_dir + "/heatmaps");

    PganModel model;
    load_model(checkpoint, model);
    if (!model.config.uses_parts())
        throw ConfigError("attention-report: checkpoint is a baseline model");

    Dataset test = load_test_split(cfg, data_dir);
    std::vector<ProposalSet> proposals;
    if (model.config.variant != Variant::grid)
        proposals = dataset_proposals(test, eval_noise(cfg), model.config.d,
                                      model.config.feat_h(), model.config.feat_w());

    const int d_eff = model.config.effective_d();
    std::ofstream csv(out_dir + "/attention.csv");
    csv << "file";
    for (int i = 1; i <= d_eff; ++i) csv << ",w_" << i;
    if (model.config.variant != Variant::grid)
        for (int i = 1; i <= d_eff; ++i) csv << ",box_" << i;
    csv << "\n";

    const int batch = 32;
    const int n = static_cast<int>(test.samples.size());
    for (int start = 0; start < n; start += batch) {
        const int count = std::min(batch, n - start);
        Map4 images(count, model.config.img_h, model.config.img_w,
                    model.config.img_ch);
        std::vector<const std::vector<PartMask>*> masks(count, nullptr);
        for (int i = 0; i < count; ++i) {
            const auto& img = test.samples[start + i].pixels;
            std::copy(img.v.begin(), img.v.end(),
                      images.v.begin() + images.offset(i, 0, 0));
            if (!proposals.empty()) masks[i] = &proposals[start + i].masks;
        }
        auto infos = model.attention(images, masks);
        for (int i = 0; i < count; ++i) {
            const auto& s = test.samples[start + i];
            csv << s.file;
            for (double w : infos[i].weights) csv << "," << format_double(w);
            if (model.config.variant != Variant::grid)
                for (const auto& b : proposals[start + i].boxes) {
                    csv << "," << format_double(b.x1) << ":" << format_double(b.y1)
                        << ":" << format_double(b.x2) << ":" << format_double(b.y2)
                        << ":" << format_double(b.confidence);
                    if (b.attribute) csv << ":" << *b.attribute;
                }
            csv << "\n";

            std::string stem = s.file;
            for (auto& ch : stem)
                if (ch == '/') ch = '_';
            stem = stem.substr(0, stem.rfind('.'));
            write_pgm_bytes(out_dir + "/heatmaps/" + stem + ".pgm",
                            model.config.feat_h(), model.config.feat_w(),
                            infos[i].heatmap);
        }
    }

    // attribute-level aggregate when box attributes are available
    if (model.config.variant != Variant::grid && !proposals.empty()) {
        std::map<std::string, std::pair<double, int>> agg;
        for (int i = 0; i < n; ++i) {
            Map4 images(1, model.config.img_h, model.config.img_w, model.config.img_ch);
            std::copy(test.samples[i].pixels.v.begin(), test.samples[i].pixels.v.end(),
                      images.v.begin());
            std::vector<const std::vector<PartMask>*> masks{&proposals[i].masks};
            auto infos = model.attention(images, masks);
            for (std::size_t b = 0; b < proposals[i].boxes.size(); ++b) {
                const auto& attr = proposals[i].boxes[b].attribute;
                const std::string key = attr ? *attr : "(none)";
                agg[key].first += infos[0].weights[b];
                agg[key].second += 1;
            }
        }
        std::ofstream f(out_dir + "/attribute_weights.csv");
        f << "attribute,mean_weight,count\n";
        for (const auto& [attr, acc] : agg)
            f << attr << "," << format_double(acc.first / acc.second) << ","
              << acc.second << "\n";
    }

    manifest.outputs = {out_dir + "/attention.csv"};
    manifest.finish();
    return 0;
}

int cmd_ablate(const AppConfig& cfg, const AblateAxes& axes,
               const std::string& data_dir, const std::string& out_dir) {
    RunManifest manifest{"ablate", &cfg, out_dir};
    fs::create_directories(out_dir);

    Dataset full = load_dataset(data_dir);
    Dataset train_ds, test_ds;
    split_train_test(full, cfg.train_frac, train_ds, test_ds);

    std::vector<int> ds = axes.d_values.empty() ? std::vector<int>{cfg.train.d}
                                                : axes.d_values;
    std::vector<double> lambdas = axes.lambda_values.empty()
                                      ? std::vector<double>{cfg.train.lambda}
                                      : axes.lambda_values;

    std::ofstream table(out_dir + "/ablate.csv");
    table << "variant,d,lambda,dim,seeds,map_mean,map_std,top1_mean,top1_std,"
             "top5_mean,top5_std\n";

    for (const auto& variant : axes.variants)
        for (int d : ds)
            for (double lambda : lambdas) {
                std::vector<double> maps, top1s, top5s;
                for (int s = 0; s < axes.seeds; ++s) {
                    AppConfig cell = cfg;
                    cell.train.d = d;
                    cell.train.lambda = lambda;
                    cell.train.seed = cfg.train.seed + static_cast<std::uint64_t>(s);
                    const std::string cell_dir =
                        out_dir + "/cells/" + variant + "_d" + std::to_string(d) +
                        "_l" + format_double(lambda) + "_s" + std::to_string(s);

                    TrainOptions opts;
                    opts.variant = parse_variant(variant);
                    opts.cfg = cell.train;
                    opts.detector = cell.detector;
                    opts.img_h = train_ds.samples.front().pixels.h;
                    opts.img_w = train_ds.samples.front().pixels.w;
                    opts.img_ch = train_ds.samples.front().pixels.ch;
                    opts.out_dir = cell_dir;
                    opts.quiet = true;
                    TrainResult result = train(train_ds, opts);

                    MetricsReport report =
                        evaluate_checkpoint(cell, result.checkpoint_path, test_ds);
                    maps.push_back(report.map);
                    top1s.push_back(report.top_k(1));
                    top5s.push_back(report.top_k(5));
                }
                auto mean_std = [](const std::vector<double>& xs) {
                    double mean = 0;
                    for (double x : xs) mean += x;
                    mean /= xs.size();
                    double var = 0;
                    for (double x : xs) var += (x - mean) * (x - mean);
                    return std::pair<double, double>(mean,
                                                     std::sqrt(var / xs.size()));
                };
                auto [mm, ms] = mean_std(maps);
                auto [t1m, t1s] = mean_std(top1s);
                auto [t5m, t5s] = mean_std(top5s);
                table << variant << "," << d << "," << format_double(lambda) << ","
                      << 2 * cfg.train.c_prime << "," << axes.seeds << ","
                      << format_double(mm) << "," << format_double(ms) << ","
                      << format_double(t1m) << "," << format_double(t1s) << ","
                      << format_double(t5m) << "," << format_double(t5s) << "\n";
            }

    manifest.outputs = {out_dir + "/ablate.csv"};
    manifest.finish();
    return 0;
}

} // namespace pgan
