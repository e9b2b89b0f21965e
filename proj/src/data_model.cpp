#include "pgan/data_model.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "pgan/errors.hpp"
#include "pgan/rng.hpp"

namespace fs = std::filesystem;

namespace pgan {

const std::array<std::string, 16> kAttributeVocab = {
    "anusigns",  "backmirror", "carlight",  "carrier",
    "cartopwindow", "entrylicense", "hungs", "layon",
    "lightcover", "logo",      "newersign", "tissuebox",
    "plate",     "safebelt",   "wheel",     "windglass"};

bool is_known_attribute(const std::string& name) {
    return std::find(kAttributeVocab.begin(), kAttributeVocab.end(), name) !=
           kAttributeVocab.end();
}

int Dataset::num_cameras() const {
    std::set<int> cams;
    for (const auto& s : samples) cams.insert(s.camera);
    return static_cast<int>(cams.size());
}

namespace {

std::string fmt_double(double x) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& tok, const std::string& context) {
    double out = 0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
        throw IngestError("bad numeric field '" + tok + "' in " + context);
    return out;
}

std::vector<std::string> split_on(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

std::string box_to_string(const PartBox& b) {
    std::string s = fmt_double(b.x1) + "," + fmt_double(b.y1) + "," +
                    fmt_double(b.x2) + "," + fmt_double(b.y2) + "," +
                    fmt_double(b.confidence);
    if (b.attribute) s += "," + *b.attribute;
    return s;
}

PartBox parse_box(const std::string& tok, const std::string& context,
                  LoadReport* report) {
    auto fields = split_on(tok, ',');
    if (fields.size() != 5 && fields.size() != 6)
        throw IngestError("box needs 5 or 6 comma fields in " + context);
    PartBox b;
    b.x1 = parse_double(fields[0], context);
    b.y1 = parse_double(fields[1], context);
    b.x2 = parse_double(fields[2], context);
    b.y2 = parse_double(fields[3], context);
    b.confidence = parse_double(fields[4], context);
    if (fields.size() == 6) {
        if (!is_known_attribute(fields[5]))
            throw IngestError("unknown attribute '" + fields[5] + "' in " + context);
        b.attribute = fields[5];
    }
    if (b.confidence < 0.0 || b.confidence > 1.0)
        throw IngestError("confidence out of [0,1] in " + context);
    if (b.x1 > b.x2) {
        std::swap(b.x1, b.x2);
        if (report) {
            ++report->corner_swaps;
            report->warnings.push_back("swapped x corners in " + context);
        }
    }
    if (b.y1 > b.y2) {
        std::swap(b.y1, b.y2);
        if (report) {
            ++report->corner_swaps;
            report->warnings.push_back("swapped y corners in " + context);
        }
    }
    if (b.x1 == b.x2 || b.y1 == b.y2)
        throw IngestError("degenerate box in " + context);
    return b;
}

} // namespace

std::string manifest_line(const ImageSample& s) {
    std::string boxes;
    for (std::size_t i = 0; i < s.boxes.size(); ++i) {
        if (i) boxes += ";";
        boxes += box_to_string(s.boxes[i]);
    }
    return s.file + "\t" + std::to_string(s.source_id) + "\t" +
           std::to_string(s.camera) + "\t" + boxes;
}

Dataset load_dataset(const std::string& dir, LoadReport* report) {
    const fs::path root(dir);
    const fs::path manifest = root / "manifest.tsv";
    std::ifstream f(manifest);
    if (!f) throw IngestError("load_dataset: missing manifest " + manifest.string());

    Dataset ds;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string context = "record " + std::to_string(lineno) + " of " +
                                    manifest.string();
        auto fields = split_on(line, '\t');
        if (fields.size() != 4)
            throw IngestError("expected 4 tab fields in " + context);
        ImageSample s;
        s.file = fields[0];
        s.source_id = static_cast<int>(parse_double(fields[1], context));
        s.camera = static_cast<int>(parse_double(fields[2], context));
        if (s.source_id < 0) throw IngestError("negative identity in " + context);
        if (!fields[3].empty())
            for (const auto& tok : split_on(fields[3], ';'))
                s.boxes.push_back(parse_box(tok, context, report));
        const fs::path img_path = root / s.file;
        if (!fs::exists(img_path))
            throw IngestError("missing image file '" + s.file + "' referenced by " +
                              context);
        s.pixels = read_pnm(img_path.string());
        if (s.pixels.h < 32 || s.pixels.w < 32)
            throw IngestError("image smaller than 32x32 in " + context);
        ds.samples.push_back(std::move(s));
        if (report) ++report->records;
    }

    // dense label re-indexing over sorted source ids
    std::set<int> ids;
    for (const auto& s : ds.samples) ids.insert(s.source_id);
    std::map<int, int> dense;
    int next = 0;
    for (int id : ids) dense[id] = next++;
    for (auto& s : ds.samples) s.identity = dense[s.source_id];
    ds.num_identities = next;
    return ds;
}

void save_dataset(const std::string& dir, const Dataset& ds) {
    const fs::path root(dir);
    fs::create_directories(root);
    std::ofstream f(root / "manifest.tsv");
    if (!f) throw IngestError("save_dataset: cannot write manifest in " + dir);
    for (const auto& s : ds.samples) {
        f << manifest_line(s) << "\n";
        const fs::path img_path = root / s.file;
        fs::create_directories(img_path.parent_path());
        write_pnm(img_path.string(), s.pixels);
    }
}

void split_train_test(const Dataset& full, double train_frac, Dataset& train,
                      Dataset& test) {
    if (train_frac <= 0.0 || train_frac >= 1.0)
        throw ConfigError("split_train_test: train_frac must be in (0,1)");
    const int k = full.num_identities;
    const int n_train = static_cast<int>(std::ceil(train_frac * k));
    if (n_train <= 0 || n_train >= k)
        throw ConfigError("split_train_test: split leaves an empty side");

    train = Dataset{};
    test = Dataset{};
    train.split = Split::train;
    test.split = Split::query;
    for (const auto& s : full.samples)
        (s.identity < n_train ? train : test).samples.push_back(s);

    // re-densify test-side labels; train labels are already 0..n_train-1
    for (auto& s : test.samples) s.identity -= n_train;
    train.num_identities = n_train;
    test.num_identities = k - n_train;
}

RetrievalProtocol split_protocol(const Dataset& dataset, ProtocolKind kind,
                                 std::uint64_t seed) {
    RetrievalProtocol proto;
    proto.kind = kind;
    proto.seed = seed;

    if (kind == ProtocolKind::veri) {
        if (dataset.num_cameras() < 2)
            throw ProtocolError(
                "veri protocol needs at least 2 cameras in the dataset");
        proto.query = dataset;
        proto.query.split = Split::query;
        proto.gallery = dataset;
        proto.gallery.split = Split::gallery;
        const int n = static_cast<int>(dataset.samples.size());
        proto.query_index.resize(n);
        proto.gallery_index.resize(n);
        for (int i = 0; i < n; ++i) proto.query_index[i] = proto.gallery_index[i] = i;
        proto.validity.assign(static_cast<std::size_t>(n) * n, 1);
        for (int q = 0; q < n; ++q)
            for (int g = 0; g < n; ++g) {
                const auto& sq = dataset.samples[q];
                const auto& sg = dataset.samples[g];
                const bool same_image = q == g;
                const bool junk = sq.identity == sg.identity && sq.camera == sg.camera;
                if (same_image || junk)
                    proto.validity[static_cast<std::size_t>(q) * n + g] = 0;
            }
        return proto;
    }

    // vehicleid: one random image per identity forms the gallery
    std::map<int, std::vector<int>> by_id;
    for (int i = 0; i < static_cast<int>(dataset.samples.size()); ++i)
        by_id[dataset.samples[i].identity].push_back(i);

    Rng rng(derive_seed(seed, 0x76656869ULL));
    std::vector<int> gallery_idx, query_idx;
    for (auto& [id, idxs] : by_id) {
        const int pick = static_cast<int>(rng.uniform_int(idxs.size()));
        gallery_idx.push_back(idxs[pick]);
        for (int j = 0; j < static_cast<int>(idxs.size()); ++j)
            if (j != pick) query_idx.push_back(idxs[j]);
    }
    std::sort(query_idx.begin(), query_idx.end());

    proto.query.split = Split::query;
    proto.gallery.split = Split::gallery;
    for (int i : query_idx) proto.query.samples.push_back(dataset.samples[i]);
    for (int i : gallery_idx) proto.gallery.samples.push_back(dataset.samples[i]);
    proto.query.num_identities = dataset.num_identities;
    proto.gallery.num_identities = dataset.num_identities;
    proto.query_index = query_idx;
    proto.gallery_index = gallery_idx;
    proto.validity.assign(query_idx.size() * gallery_idx.size(), 1);
    return proto;
}

void TrainConfig::validate() const {
    if (d < 1) throw ConfigError("TrainConfig: D must be >= 1");
    if (lambda < 0) throw ConfigError("TrainConfig: lambda must be >= 0");
    if (p < 1 || k < 1) throw ConfigError("TrainConfig: P and K must be >= 1");
    if (c_prime > backbone_c)
        throw ConfigError("TrainConfig: C' must not exceed C");
    if (epochs < 1) throw ConfigError("TrainConfig: epochs must be >= 1");
    if (erasing_prob < 0 || erasing_prob > 1)
        throw ConfigError("TrainConfig: erasing_prob must be in [0,1]");
    if (se_reduction < 1) throw ConfigError("TrainConfig: se_reduction must be >= 1");
}

} // namespace pgan
