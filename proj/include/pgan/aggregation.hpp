#pragma once

#include <string>
#include <vector>

#include "pgan/nn.hpp"
#include "pgan/tensor.hpp"

namespace pgan {

enum class EmbedRole { global_c, part_c, fused_2c, fused_bn };

std::string role_name(EmbedRole role);

struct Embedding {
    std::vector<double> v;
    EmbedRole role = EmbedRole::global_c;
};

/// Channel concatenation, F_g channels first.
FeatureMap fuse(const FeatureMap& fg, const FeatureMap& fp);
void split_fused(const FeatureMap& fused, FeatureMap& a, FeatureMap& b);
Map4 fuse_batch(const Map4& a, const Map4& b);

/// Spatial mean per channel.
Embedding gap(const FeatureMap& f, EmbedRole role);

/// Squeeze-and-excitation channel gate: GAP -> bottleneck (ratio r) -> sigmoid,
/// output = input scaled per channel.
class SEBlock {
public:
    SEBlock() = default;
    SEBlock(const std::string& name, int c, int reduction, Rng& rng);

    Map4 forward(const Map4& in);
    void backward(const Map4& dout, Map4* din);

    Dense fc1, fc2;
    int channels = 0;

private:
    Map4 cached_in_;
    Mat squeeze_, hidden_, gate_;
};

/// conv1x1 -> BN -> relu -> conv3x3 -> BN, added to a conv1x1 projection
/// shortcut. No activation after the sum, so a zeroed branch reproduces the
/// shortcut exactly.
class ResidualBlock {
public:
    ResidualBlock() = default;
    ResidualBlock(const std::string& name, int ci, int co, Rng& rng);

    Map4 forward(const Map4& in, bool train);
    void backward(const Map4& dout, Map4* din);

    Conv2d conv1, conv2, shortcut;
    BatchNorm2d bn1, bn2;
    ReluLayer relu;
};

/// The refine operation: SE block then residual block C_in -> C_out.
class Refine {
public:
    Refine() = default;
    Refine(const std::string& name, int ci, int co, int reduction, Rng& rng);

    Map4 forward(const Map4& in, bool train);
    void backward(const Map4& dout, Map4* din);
    std::vector<Param*> params();

    SEBlock se;
    ResidualBlock res;
};

/// Batch normalization over embedding rows with a learned scale and no shift.
/// Inference uses running statistics and raises NumericsError when no
/// training batch has ever been seen.
class BNNeck {
public:
    BNNeck() = default;
    explicit BNNeck(const std::string& name, int dim, double momentum = 0.1,
                    double eps = 1e-5);

    Mat forward(const Mat& in, bool train);
    void backward(const Mat& dout, Mat* din);

    Param gamma;
    std::vector<double> running_mean, running_var;
    bool initialized = false;
    double momentum = 0.1, eps = 1e-5;
    int dim = 0;

private:
    Mat xhat_;
    std::vector<double> save_invstd_;
};

} // namespace pgan
