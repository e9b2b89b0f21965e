#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pgan/data_model.hpp"
#include "pgan/model.hpp"
#include "pgan/part_proposals.hpp"

namespace pgan {

/// lr0 * decay_factor^floor(epoch / decay_every).
double lr_schedule(int epoch, const TrainConfig& cfg);

/// PK batches for one epoch: identities shuffled and chunked into groups of
/// P (the last chunk topped up with extra identities), K images drawn per
/// identity, with replacement when an identity has fewer than K images.
/// Deterministic in (seed, epoch).
std::vector<std::vector<int>> pk_epoch_batches(const Dataset& train, int p, int k,
                                               std::uint64_t seed, int epoch);

/// With probability p replaces one rectangle (area fraction in [0.02,0.4],
/// aspect in [0.3,3.3]) by uniform noise.
void random_erasing(Image& img, double p, Rng& rng);

class Adam {
public:
    Adam(std::vector<Param*> params, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8, double weight_decay = 0.0);

    void step(double lr);
    void zero_grad();

    std::vector<Param*> params;
    std::vector<std::vector<double>> m, v;
    double beta1, beta2, eps, weight_decay;
    long t = 0;
};

struct TrainOptions {
    Variant variant = Variant::pgan;
    TrainConfig cfg;
    DetectorNoise detector;
    int img_h = 64, img_w = 64, img_ch = 3;
    std::string out_dir;
    std::string resume_checkpoint;       // empty = fresh start
    std::string proposal_cache;          // optional read/write path
    bool quiet = false;
};

struct TrainResult {
    std::string checkpoint_path;
    std::string loss_log_path;
    std::vector<LossReport> epoch_losses;
};

/// Full training loop: PK batches, random erasing, Adam with the step decay
/// schedule, per-epoch loss log CSV `epoch,L_c,L_f,L_g,L_p,total,lr`, final
/// checkpoint. Deterministic in cfg.seed.
TrainResult train(const Dataset& train_ds, const TrainOptions& opts);

/// Fixed per-image detector proposals for a dataset (seeded by image index).
std::vector<ProposalSet> dataset_proposals(const Dataset& ds,
                                           const DetectorNoise& noise, int d,
                                           int feat_h, int feat_w);

/// Inference embeddings for every sample, in dataset order.
Mat embed_dataset(PganModel& model, const Dataset& ds,
                  const std::vector<ProposalSet>& proposals);

std::string format_double(double x);

} // namespace pgan
