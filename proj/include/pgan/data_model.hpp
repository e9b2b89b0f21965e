#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pgan/image_io.hpp"

namespace pgan {

/// The 16 part attribute names carried by annotations. Selection never uses
/// them; they only feed the attention statistics report.
extern const std::array<std::string, 16> kAttributeVocab;
bool is_known_attribute(const std::string& name);

/// Axis-aligned part region in image-pixel coordinates, end-exclusive.
struct PartBox {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
    double confidence = 1.0;
    std::optional<std::string> attribute;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
};

struct ImageSample {
    Image pixels;                 // values in [0,1]
    int identity = 0;             // dense label (re-indexed at load)
    int source_id = 0;            // identity as written in the manifest
    int camera = 0;
    std::vector<PartBox> boxes;   // ground truth, possibly empty
    std::string file;             // manifest-relative image path
};

enum class Split { train, query, gallery };

struct Dataset {
    std::vector<ImageSample> samples;
    Split split = Split::train;
    int num_identities = 0;       // dense label count

    int num_cameras() const;
};

struct LoadReport {
    int records = 0;
    int corner_swaps = 0;
    std::vector<std::string> warnings;
};

/// Reads `dir/manifest.tsv` plus the image files it names. Dense label
/// re-indexing maps sorted source ids onto 0..K-1. Malformed box corners are
/// swapped (with a warning in the report); a record naming a missing image
/// file raises IngestError.
Dataset load_dataset(const std::string& dir, LoadReport* report = nullptr);

/// Writes `dir/manifest.tsv` and the image files. Box coordinates use
/// shortest round-trip formatting so save/load/save is byte-stable.
void save_dataset(const std::string& dir, const Dataset& ds);

std::string manifest_line(const ImageSample& s);

/// Disjoint identity split: sorted dense labels, first ceil(frac*K) become
/// the train set. Labels are re-densified within each side.
void split_train_test(const Dataset& full, double train_frac, Dataset& train,
                      Dataset& test);

enum class ProtocolKind { veri, vehicleid };

/// Query/gallery construction over one evaluation dataset. validity(q,g)
/// marks gallery entries that participate in the ranking for query q.
struct RetrievalProtocol {
    Dataset query;
    Dataset gallery;
    std::vector<std::uint8_t> validity; // row-major query x gallery
    std::vector<int> query_index;       // indices into the source dataset
    std::vector<int> gallery_index;
    ProtocolKind kind = ProtocolKind::veri;
    std::uint64_t seed = 0;

    bool valid(int q, int g) const {
        return validity[static_cast<std::size_t>(q) * gallery.samples.size() + g] != 0;
    }
};

/// veri: query = gallery = dataset; a gallery entry is invalid for a query
/// when it is the query image itself or shares both identity and camera.
/// vehicleid: one random image per identity forms the gallery, the remainder
/// are queries, everything valid.
RetrievalProtocol split_protocol(const Dataset& dataset, ProtocolKind kind,
                                 std::uint64_t seed);

/// Training hyperparameters. Defaults are the desk-scale setup that trains in
/// minutes on CPU; paper-scale values (C'=256 on a 2048-channel backbone,
/// P=16, lr0=1.75e-4 halved every 20 of 130 epochs) are reached through the
/// config file.
struct TrainConfig {
    int d = 8;                    // part count
    double lambda = 2.0;          // cross-entropy weight
    double margin = 0.3;          // triplet hinge margin
    int backbone_c = 64;          // C, backbone output channels
    int c_prime = 32;             // C', channels after refine
    int p = 8;                    // identities per batch
    int k = 4;                    // images per identity
    double lr0 = 1.5e-3;
    int decay_every = 10;
    double decay_factor = 0.5;
    int epochs = 30;
    double erasing_prob = 0.5;
    std::uint64_t seed = 0;
    bool remove_last_stride = true;
    int se_reduction = 4;
    double weight_decay = 5e-4;

    void validate() const;
};

} // namespace pgan
