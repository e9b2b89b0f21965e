#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pgan/data_model.hpp"
#include "pgan/tensor.hpp"

namespace pgan {

/// Binary mask on the feature-map grid. Construction enforces area >= 1 and
/// entries in {0,1}; a zero-area mask cannot exist.
struct PartMask {
    int h = 0, w = 0;
    std::vector<std::uint8_t> grid;
    int area = 0;

    PartMask() = default;
    PartMask(int h_, int w_, std::vector<std::uint8_t> grid_);

    std::uint8_t at(int y, int x) const {
        return grid[static_cast<std::size_t>(y) * w + x];
    }
};

PartMask complement_mask(const PartMask& m); // within bounds; may be invalid if m is all ones

/// Exactly D boxes in descending confidence plus their rasterized masks.
struct ProposalSet {
    std::vector<PartBox> boxes;
    std::vector<PartMask> masks;
};

/// Noise model standing in for a pre-trained part detector: corner jitter,
/// dropped boxes, spurious background boxes.
struct DetectorNoise {
    double jitter_frac = 0.0;   // corner shift up to this fraction of box size
    double miss_prob = 0.0;
    double false_pos_rate = 0.0; // Poisson mean of background boxes per image
    std::uint64_t seed = 0;
};

/// Jitters/drops the sample's ground-truth boxes and appends random
/// background boxes. True boxes get confidence U[0.5,1.0], false ones
/// U[0.1,0.6]. May return an empty sequence.
std::vector<PartBox> simulate_detector(const ImageSample& sample,
                                       const DetectorNoise& noise);

/// The d highest-confidence boxes, descending; ties broken by lexicographic
/// (x1,y1,x2,y2). Fewer than d detections pad by cycling the available boxes;
/// zero detections yield d full-frame boxes with confidence 0.
std::vector<PartBox> select_top_d(const std::vector<PartBox>& detections, int d,
                                  int img_h, int img_w);

/// Scales an image-pixel box onto the feature grid: floor(start)/ceil(end),
/// clamped to bounds. A box that rounds empty takes the single cell at its
/// center, so area >= 1 always holds.
PartMask rasterize_mask(const PartBox& box, int img_h, int img_w, int feat_h,
                        int feat_w);

/// Element-wise product of the mask with every channel of the map.
FeatureMap apply_mask(const FeatureMap& fg, const PartMask& m);

ProposalSet make_proposals(const ImageSample& sample, const DetectorNoise& noise,
                           int d, int feat_h, int feat_w);

/// H*W single-cell masks in row-major order (the grid-attention degenerate
/// case of the part machinery).
std::vector<PartMask> grid_masks(int feat_h, int feat_w);

/// Optional cache so detector outputs can be precomputed: one line per image,
/// `file<TAB>boxes` with the manifest box syntax.
void write_proposal_cache(const std::string& path,
                          const std::map<std::string, std::vector<PartBox>>& boxes);
std::map<std::string, std::vector<PartBox>> read_proposal_cache(
    const std::string& path);

} // namespace pgan
