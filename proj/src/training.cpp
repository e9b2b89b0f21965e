#include "pgan/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "pgan/checkpoint.hpp"
#include "pgan/errors.hpp"

namespace fs = std::filesystem;

namespace pgan {

std::string format_double(double x) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

double lr_schedule(int epoch, const TrainConfig& cfg) {
    if (epoch < 0) throw ConfigError("lr_schedule: negative epoch");
    const int halvings = epoch / cfg.decay_every;
    return cfg.lr0 * std::pow(cfg.decay_factor, halvings);
}

std::vector<std::vector<int>> pk_epoch_batches(const Dataset& train, int p, int k,
                                               std::uint64_t seed, int epoch) {
    std::map<int, std::vector<int>> by_id;
    for (int i = 0; i < static_cast<int>(train.samples.size()); ++i)
        by_id[train.samples[i].identity].push_back(i);
    const int num_ids = static_cast<int>(by_id.size());
    if (num_ids < p)
        throw SamplerError("pk sampler: dataset has " + std::to_string(num_ids) +
                           " identities but P=" + std::to_string(p));

    std::vector<int> ids;
    ids.reserve(num_ids);
    for (const auto& [id, _] : by_id) ids.push_back(id);

    Rng rng(derive_seed(seed, 0x706bULL, static_cast<std::uint64_t>(epoch)));

    // one epoch sees roughly every image once: repeat the identity pass until
    // P*K*batches covers the dataset
    const int passes = std::max(
        1, static_cast<int>(std::llround(static_cast<double>(train.samples.size()) /
                                         (static_cast<double>(num_ids) * k))));

    std::vector<std::vector<int>> batches;
    for (int pass = 0; pass < passes; ++pass) {
        rng.shuffle(ids);
        for (int start = 0; start < num_ids; start += p) {
            std::vector<int> chunk(ids.begin() + start,
                                   ids.begin() + std::min(start + p, num_ids));
            // top up a short final chunk with identities from the shuffle head
            for (int j = 0; static_cast<int>(chunk.size()) < p; ++j)
                if (std::find(chunk.begin(), chunk.end(), ids[j]) == chunk.end())
                    chunk.push_back(ids[j]);

            std::vector<int> batch;
            batch.reserve(static_cast<std::size_t>(p) * k);
            for (int id : chunk) {
                const auto& pool = by_id[id];
                std::vector<int> order(pool.size());
                for (std::size_t i = 0; i < pool.size(); ++i)
                    order[i] = static_cast<int>(i);
                rng.shuffle(order);
                for (int j = 0; j < k; ++j) {
                    const int pick = static_cast<int>(pool.size()) > j
                                         ? order[j]
                                         : static_cast<int>(rng.uniform_int(pool.size()));
                    batch.push_back(pool[pick]);
                }
            }
            batches.push_back(std::move(batch));
        }
    }
    return batches;
}

void random_erasing(Image& img, double p, Rng& rng) {
    if (!rng.bernoulli(p)) return;
    const int hw = img.h * img.w;
    for (int attempt = 0; attempt < 100; ++attempt) {
        const double frac = rng.uniform(0.02, 0.4);
        const double aspect = rng.uniform(0.3, 3.3);
        const double target = frac * hw;
        const int eh = static_cast<int>(std::lround(std::sqrt(target * aspect)));
        const int ew = static_cast<int>(std::lround(std::sqrt(target / aspect)));
        if (eh < 1 || ew < 1 || eh >= img.h || ew >= img.w) continue;
        const double got = static_cast<double>(eh) * ew / hw;
        if (got < 0.02 || got > 0.4) continue;
        const int y0 = static_cast<int>(rng.uniform_int(img.h - eh + 1));
        const int x0 = static_cast<int>(rng.uniform_int(img.w - ew + 1));
        for (int y = y0; y < y0 + eh; ++y)
            for (int x = x0; x < x0 + ew; ++x)
                for (int c = 0; c < img.ch; ++c) img.at(y, x, c) = rng.uniform();
        return;
    }
}

Adam::Adam(std::vector<Param*> params_, double beta1_, double beta2_, double eps_,
           double weight_decay_)
    : params(std::move(params_)), beta1(beta1_), beta2(beta2_), eps(eps_),
      weight_decay(weight_decay_) {
    for (Param* p : params) {
        m.emplace_back(p->numel(), 0.0);
        v.emplace_back(p->numel(), 0.0);
    }
}

void Adam::zero_grad() {
    for (Param* p : params) p->zero_grad();
}

void Adam::step(double lr) {
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, t);
    const double bc2 = 1.0 - std::pow(beta2, t);
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Param& p = *params[pi];
        auto& mi = m[pi];
        auto& vi = v[pi];
        const double plr = lr * p.lr_scale;
        for (std::size_t i = 0; i < p.numel(); ++i) {
            const double g = p.g[i] + weight_decay * p.w[i];
            mi[i] = beta1 * mi[i] + (1.0 - beta1) * g;
            vi[i] = beta2 * vi[i] + (1.0 - beta2) * g * g;
            const double mhat = mi[i] / bc1;
            const double vhat = vi[i] / bc2;
            p.w[i] -= plr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

std::vector<ProposalSet> dataset_proposals(const Dataset& ds,
                                           const DetectorNoise& noise, int d,
                                           int feat_h, int feat_w) {
    std::vector<ProposalSet> out(ds.samples.size());
    const bool par = kernels::parallel_enabled();
#pragma omp parallel for schedule(dynamic) if (par)
    for (int i = 0; i < static_cast<int>(ds.samples.size()); ++i) {
        DetectorNoise per = noise;
        per.seed = derive_seed(noise.seed, 0xb0cedULL, static_cast<std::uint64_t>(i));
        out[i] = make_proposals(ds.samples[i], per, d, feat_h, feat_w);
    }
    return out;
}

Mat embed_dataset(PganModel& model, const Dataset& ds,
                  const std::vector<ProposalSet>& proposals) {
    const int n = static_cast<int>(ds.samples.size());
    const int batch = 32;
    Mat out(n, model.config.embed_dim());
    for (int start = 0; start < n; start += batch) {
        const int count = std::min(batch, n - start);
        Map4 images(count, model.config.img_h, model.config.img_w,
                    model.config.img_ch);
        std::vector<const std::vector<PartMask>*> masks(count, nullptr);
        for (int i = 0; i < count; ++i) {
            const auto& img = ds.samples[start + i].pixels;
            std::copy(img.v.begin(), img.v.end(),
                      images.v.begin() + images.offset(i, 0, 0));
            if (!proposals.empty()) masks[i] = &proposals[start + i].masks;
        }
        Mat emb = model.embed(images, masks);
        for (int i = 0; i < count; ++i)
            std::copy(emb.row(i), emb.row(i) + emb.cols, out.row(start + i));
    }
    return out;
}

TrainResult train(const Dataset& train_ds, const TrainOptions& opts) {
    const TrainConfig& cfg = opts.cfg;
    cfg.validate();
    if (train_ds.samples.empty()) throw ConfigError("train: empty dataset");

    fs::create_directories(opts.out_dir);

    ModelConfig mc;
    mc.variant = opts.variant;
    mc.d = cfg.d;
    mc.backbone.channels.back() = cfg.backbone_c;
    mc.backbone.remove_last_stride = cfg.remove_last_stride;
    mc.backbone.in_channels = opts.img_ch;
    mc.c_prime = cfg.c_prime;
    mc.se_reduction = cfg.se_reduction;
    mc.num_classes = train_ds.num_identities;
    mc.margin = cfg.margin;
    mc.lambda = cfg.lambda;
    mc.img_h = opts.img_h;
    mc.img_w = opts.img_w;
    mc.img_ch = opts.img_ch;

    PganModel model(mc, cfg.seed);
    Adam adam(model.params(), 0.9, 0.999, 1e-8, cfg.weight_decay);

    int start_epoch = 0;
    const std::string log_path = opts.out_dir + "/loss_log.csv";
    if (!opts.resume_checkpoint.empty()) {
        CheckpointMeta meta = load_checkpoint(opts.resume_checkpoint, model, &adam);
        start_epoch = meta.epoch + 1;
    } else {
        std::ofstream log(log_path);
        log << "epoch,L_c,L_f,L_g,L_p,total,lr\n";
    }

    std::vector<ProposalSet> proposals;
    if (mc.uses_parts() && opts.variant != Variant::grid) {
        if (!opts.proposal_cache.empty() && fs::exists(opts.proposal_cache)) {
            auto cached = read_proposal_cache(opts.proposal_cache);
            proposals.resize(train_ds.samples.size());
            for (std::size_t i = 0; i < train_ds.samples.size(); ++i) {
                auto it = cached.find(train_ds.samples[i].file);
                if (it == cached.end())
                    throw IngestError("proposal cache misses file " +
                                      train_ds.samples[i].file);
                proposals[i].boxes = select_top_d(it->second, cfg.d,
                                                  train_ds.samples[i].pixels.h,
                                                  train_ds.samples[i].pixels.w);
                for (const auto& b : proposals[i].boxes)
                    proposals[i].masks.push_back(
                        rasterize_mask(b, train_ds.samples[i].pixels.h,
                                       train_ds.samples[i].pixels.w, mc.feat_h(),
                                       mc.feat_w()));
            }
        } else {
            DetectorNoise noise = opts.detector;
            noise.seed = derive_seed(cfg.seed, 0xdeadULL, noise.seed);
            proposals = dataset_proposals(train_ds, noise, cfg.d, mc.feat_h(),
                                          mc.feat_w());
            if (!opts.proposal_cache.empty()) {
                std::map<std::string, std::vector<PartBox>> cache_out;
                for (std::size_t i = 0; i < train_ds.samples.size(); ++i)
                    cache_out[train_ds.samples[i].file] = proposals[i].boxes;
                write_proposal_cache(opts.proposal_cache, cache_out);
            }
        }
    }

    TrainResult result;
    result.loss_log_path = log_path;

    for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_schedule(epoch, cfg);
        const auto batches = pk_epoch_batches(train_ds, cfg.p, cfg.k, cfg.seed, epoch);

        LossReport mean;
        for (std::size_t bi = 0; bi < batches.size(); ++bi) {
            const auto& idxs = batches[bi];
            const int n = static_cast<int>(idxs.size());
            Map4 images(n, mc.img_h, mc.img_w, mc.img_ch);
            std::vector<const std::vector<PartMask>*> masks(n, nullptr);
            std::vector<int> labels(n);
            for (int i = 0; i < n; ++i) {
                const auto& s = train_ds.samples[idxs[i]];
                Image img = s.pixels;
                Rng erng(derive_seed(cfg.seed, 0xe2a5eULL,
                                     (static_cast<std::uint64_t>(epoch) << 32) ^
                                         (static_cast<std::uint64_t>(bi) << 16) ^
                                         static_cast<std::uint64_t>(i)));
                random_erasing(img, cfg.erasing_prob, erng);
                std::copy(img.v.begin(), img.v.end(),
                          images.v.begin() + images.offset(i, 0, 0));
                labels[i] = s.identity;
                if (!proposals.empty()) masks[i] = &proposals[idxs[i]].masks;
            }

            adam.zero_grad();
            LossReport r = model.train_step(images, masks, labels);
            adam.step(lr);

            mean.l_c += r.l_c;
            mean.l_f += r.l_f;
            mean.l_g += r.l_g;
            mean.l_p += r.l_p;
            mean.total += r.total;
        }
        const double inv = 1.0 / static_cast<double>(batches.size());
        mean.l_c *= inv;
        mean.l_f *= inv;
        mean.l_g *= inv;
        mean.l_p *= inv;
        mean.total *= inv;

        std::ofstream log(log_path, std::ios::app);
        log << epoch << "," << format_double(mean.l_c) << ","
            << format_double(mean.l_f) << "," << format_double(mean.l_g) << ","
            << format_double(mean.l_p) << "," << format_double(mean.total) << ","
            << format_double(lr) << "\n";
        result.epoch_losses.push_back(mean);
        if (!opts.quiet)
            std::cerr << "[train " << variant_name(opts.variant) << "] epoch "
                      << epoch << " total " << mean.total << "\n";
    }

    CheckpointMeta meta;
    meta.epoch = cfg.epochs - 1;
    meta.seed = cfg.seed;
    meta.variant = variant_name(opts.variant);
    result.checkpoint_path = opts.out_dir + "/checkpoint.pgck";
    save_checkpoint(result.checkpoint_path, model, meta, &adam);
    return result;
}

} // namespace pgan
