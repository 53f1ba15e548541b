#include "hdrssl/model.hpp"

#include "hdrssl/photometric.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace hdrssl {

namespace {

// Tape slot layout for ReferenceBackbone.
enum Slot : int {
    kInput0,
    kInput1,
    kInput2,
    kEnc0,
    kEnc1,
    kEnc2,
    kAttCat0,
    kAttCat2,
    kAtt0,
    kAtt2,
    kFusionCat,
    kFused,
    kTrunk1,
    kTrunk2,
    kPrediction,
    kSlotCount
};

}  // namespace

ReferenceBackbone::ReferenceBackbone(int width) : width_(width) {
    if (width <= 0) throw InvalidInput("backbone width must be positive");
}

void ReferenceBackbone::declare(ParameterSet& params) {
    const int c = width_;
    encoder_ = Conv2d(params, "backbone.encoder", 6, c);
    attention0_ = Conv2d(params, "backbone.attention0", 2 * c, c);
    attention2_ = Conv2d(params, "backbone.attention2", 2 * c, c);
    fusion_ = Conv2d(params, "backbone.fusion", 3 * c, c);
    trunk1_ = Conv2d(params, "backbone.trunk1", c, c);
    trunk2_ = Conv2d(params, "backbone.trunk2", c, c);
    head_ = Conv2d(params, "backbone.head", c, 3);
}

void ReferenceBackbone::initialize(ParameterSet& params, std::mt19937_64& rng) const {
    for (const Conv2d* conv : {&encoder_, &attention0_, &attention2_, &fusion_, &trunk1_, &trunk2_, &head_})
        conv->init(params, rng);
}

BackboneOutput ReferenceBackbone::forward(const ParameterSet& params, const Tensor& input, ForwardTape* tape) const {
    if (input.c() != 18) throw InvalidInput("backbone expects an 18-channel input, got " + input.shape().str());
    std::array<Tensor, 3> frames, enc;
    for (int i = 0; i < 3; ++i) {
        frames[i] = slice_channels(input, 6 * i, 6);
        enc[i] = relu(encoder_.forward(params, frames[i]));
    }
    const Tensor* cat0_parts[] = {&enc[0], &enc[1]};
    const Tensor* cat2_parts[] = {&enc[2], &enc[1]};
    Tensor cat0 = concat_channels(cat0_parts);
    Tensor cat2 = concat_channels(cat2_parts);
    Tensor att0 = sigmoid(attention0_.forward(params, cat0));
    Tensor att2 = sigmoid(attention2_.forward(params, cat2));
    Tensor gated0 = multiply(enc[0], att0);
    Tensor gated2 = multiply(enc[2], att2);
    const Tensor* fusion_parts[] = {&gated0, &enc[1], &gated2};
    Tensor fusion_cat = concat_channels(fusion_parts);
    Tensor fused = relu(fusion_.forward(params, fusion_cat));
    Tensor t1 = relu(trunk1_.forward(params, fused));
    Tensor t2 = trunk2_.forward(params, t1);
    add_inplace(t2, fused);
    t2 = relu(t2);
    Tensor pred = sigmoid(head_.forward(params, t2));

    BackboneOutput out{pred, fused};
    if (tape) {
        tape->slots.assign(kSlotCount, Tensor{});
        for (int i = 0; i < 3; ++i) {
            tape->slots[kInput0 + i] = std::move(frames[i]);
            tape->slots[kEnc0 + i] = std::move(enc[i]);
        }
        tape->slots[kAttCat0] = std::move(cat0);
        tape->slots[kAttCat2] = std::move(cat2);
        tape->slots[kAtt0] = std::move(att0);
        tape->slots[kAtt2] = std::move(att2);
        tape->slots[kFusionCat] = std::move(fusion_cat);
        tape->slots[kFused] = std::move(fused);
        tape->slots[kTrunk1] = std::move(t1);
        tape->slots[kTrunk2] = std::move(t2);
        tape->slots[kPrediction] = std::move(pred);
    }
    return out;
}

void ReferenceBackbone::backward(ParameterSet& params, const ForwardTape& tape, const Tensor& d_prediction,
                                 const Tensor* d_feature) const {
    const auto& s = tape.slots;
    if (s.size() != kSlotCount) throw InvalidInput("backbone backward: tape was not recorded");
    const int c = width_;

    Tensor d_t2;
    head_.backward(params, s[kTrunk2], sigmoid_backward(s[kPrediction], d_prediction), &d_t2);
    Tensor dz2 = relu_backward(s[kTrunk2], d_t2);
    Tensor d_t1;
    trunk2_.backward(params, s[kTrunk1], dz2, &d_t1);
    Tensor d_fused = dz2;
    Tensor d_fused_trunk;
    trunk1_.backward(params, s[kFused], relu_backward(s[kTrunk1], d_t1), &d_fused_trunk);
    add_inplace(d_fused, d_fused_trunk);
    if (d_feature) add_inplace(d_fused, *d_feature);

    Tensor d_cat;
    fusion_.backward(params, s[kFusionCat], relu_backward(s[kFused], d_fused), &d_cat);
    std::array<Tensor, 3> d_enc;
    Tensor d_gated0 = slice_channels(d_cat, 0, c);
    d_enc[1] = slice_channels(d_cat, c, c);
    Tensor d_gated2 = slice_channels(d_cat, 2 * c, c);

    auto attention_backward = [&](const Conv2d& conv, int enc_slot, int cat_slot, int att_slot,
                                  const Tensor& d_gated, Tensor& d_enc_frame) {
        d_enc_frame = multiply(d_gated, s[att_slot]);
        Tensor d_att = multiply(d_gated, s[enc_slot]);
        Tensor d_att_cat;
        conv.backward(params, s[cat_slot], sigmoid_backward(s[att_slot], d_att), &d_att_cat);
        accumulate_channels(d_enc_frame, 0, slice_channels(d_att_cat, 0, c));
        accumulate_channels(d_enc[1], 0, slice_channels(d_att_cat, c, c));
    };
    attention_backward(attention0_, kEnc0, kAttCat0, kAtt0, d_gated0, d_enc[0]);
    attention_backward(attention2_, kEnc2, kAttCat2, kAtt2, d_gated2, d_enc[2]);

    for (int i = 0; i < 3; ++i)
        encoder_.backward(params, s[kInput0 + i], relu_backward(s[kEnc0 + i], d_enc[i]), nullptr);
}

const Tensor& ReferenceBackbone::attention_map(const ForwardTape& tape, int frame) {
    if (tape.slots.size() != kSlotCount || (frame != 0 && frame != 2))
        throw InvalidInput("attention_map: no such map");
    return tape.slots[frame == 0 ? kAtt0 : kAtt2];
}

BackboneOutput IdentityBackbone::forward(const ParameterSet&, const Tensor& input, ForwardTape*) const {
    if (input.c() != 18) throw InvalidInput("backbone expects an 18-channel input, got " + input.shape().str());
    return {clamp01(slice_channels(input, 9, 3)), input};
}

JudgeHead::JudgeHead(ParameterSet& params, int feature_channels) {
    conv1_ = Conv2d(params, "judge.conv1", feature_channels, feature_channels);
    conv2_ = Conv2d(params, "judge.conv2", feature_channels, feature_channels);
    conv3_ = Conv2d(params, "judge.conv3", feature_channels, 3);
}

Tensor JudgeHead::forward(const ParameterSet& params, const Tensor& feature, ForwardTape* tape) const {
    Tensor h1 = relu(conv1_.forward(params, feature));
    Tensor h2 = relu(conv2_.forward(params, h1));
    Tensor skip = add(h2, h1);
    Tensor u = sigmoid(conv3_.forward(params, skip));
    if (tape) tape->slots = {std::move(h1), std::move(h2), std::move(skip), u};
    return u;
}

Tensor JudgeHead::backward(ParameterSet& params, const Tensor& feature, const ForwardTape& tape,
                           const Tensor& d_uncertainty) const {
    const auto& s = tape.slots;
    if (s.size() != 4) throw InvalidInput("judge backward: tape was not recorded");
    Tensor d_skip;
    conv3_.backward(params, s[2], sigmoid_backward(s[3], d_uncertainty), &d_skip);
    Tensor d_h1_from_2;
    conv2_.backward(params, s[0], relu_backward(s[1], d_skip), &d_h1_from_2);
    Tensor d_h1 = add(d_skip, d_h1_from_2);
    Tensor d_feature;
    conv1_.backward(params, feature, relu_backward(s[0], d_h1), &d_feature);
    return d_feature;
}

std::unique_ptr<Backbone> make_backbone(const ModelSpec& spec) {
    if (spec.architecture == "ref-attn") return std::make_unique<ReferenceBackbone>(spec.width);
    if (spec.architecture == "identity") return std::make_unique<IdentityBackbone>();
    throw InvalidInput("unknown backbone architecture '" + spec.architecture + "'");
}

Network::Network(ModelSpec spec) : spec_(std::move(spec)), backbone_(make_backbone(spec_)) {
    backbone_->declare(layout_);
    judge_begin_ = layout_.count();
    judge_ = JudgeHead(layout_, backbone_->feature_channels());
}

ParameterSet Network::create_parameters(std::uint64_t seed) const {
    ParameterSet params = layout_;
    std::mt19937_64 rng(seed);
    backbone_->initialize(params, rng);
    judge_.initialize(params, rng);
    return params;
}

FullOutput Network::forward(const ParameterSet& params, const Tensor& input, NetworkTape* tape) const {
    BackboneOutput b = backbone_->forward(params, input, tape ? &tape->backbone : nullptr);
    Tensor u = judge_.forward(params, b.feature, tape ? &tape->judge : nullptr);
    if (tape) tape->feature = b.feature;
    return {std::move(b.prediction), std::move(u), std::move(b.feature)};
}

void Network::backward(ParameterSet& params, const NetworkTape& tape, const FullOutput& out,
                       const Tensor& d_prediction, const Tensor& d_uncertainty, BackwardOptions opts) const {
    Tensor d_feature;
    if (!d_uncertainty.empty()) d_feature = judge_.backward(params, tape.feature, tape.judge, d_uncertainty);
    const bool use_feature = !d_feature.empty() && opts.judge_into_features;
    const Tensor d_pred = d_prediction.empty() ? Tensor(out.prediction.shape()) : d_prediction;
    backbone_->backward(params, tape.backbone, d_pred, use_feature ? &d_feature : nullptr);
}

HdrModel::HdrModel(ModelSpec spec) : net_(std::make_shared<const Network>(spec)) {
    params_ = net_->create_parameters(spec.seed);
}

HdrModel::HdrModel(std::shared_ptr<const Network> net, ParameterSet params)
    : net_(std::move(net)), params_(std::move(params)) {
    net_->layout().require_compatible(params_, "model parameters");
}

void write_f32_blob(const std::filesystem::path& file, const std::vector<float>& values) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw InvalidInput("cannot write " + file.string());
    for (float v : values) {
        auto bits = std::bit_cast<std::uint32_t>(v);
        const unsigned char b[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                                    static_cast<unsigned char>(bits >> 16), static_cast<unsigned char>(bits >> 24)};
        out.write(reinterpret_cast<const char*>(b), 4);
    }
    if (!out) throw InvalidInput("short write to " + file.string());
}

std::vector<float> read_f32_blob(const std::filesystem::path& file, std::size_t expected) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw InvalidInput("cannot read " + file.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() != expected * 4)
        throw InvalidInput(file.string() + ": expected " + std::to_string(expected * 4) + " bytes, found " +
                           std::to_string(bytes.size()));
    std::vector<float> values(expected);
    for (std::size_t i = 0; i < expected; ++i) {
        const std::uint32_t bits = static_cast<std::uint32_t>(bytes[4 * i]) |
                                   (static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8) |
                                   (static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16) |
                                   (static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24);
        values[i] = std::bit_cast<float>(bits);
    }
    return values;
}

namespace {

std::string blob_name(std::size_t index, const std::string& name) {
    char prefix[16];
    std::snprintf(prefix, sizeof prefix, "%03zu_", index);
    return prefix + name + ".f32";
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const HdrModel& model, long long step) {
    std::filesystem::create_directories(dir);
    std::ofstream manifest(dir / "manifest.txt");
    if (!manifest) throw InvalidInput("cannot write checkpoint manifest in " + dir.string());
    const ModelSpec& spec = model.spec();
    manifest << "format hdrssl-checkpoint-1\n"
             << "architecture " << spec.architecture << "\n"
             << "width " << spec.width << "\n"
             << "seed " << spec.seed << "\n"
             << "step " << step << "\n"
             << "tensors " << model.parameters().count() << "\n";
    std::size_t i = 0;
    for (const Param& p : model.parameters()) {
        const std::string file = blob_name(i, p.name);
        manifest << "tensor " << p.name << " " << file << " " << p.shape.size();
        for (int d : p.shape) manifest << " " << d;
        manifest << "\n";
        write_f32_blob(dir / file, p.value);
        ++i;
    }
    if (!manifest) throw InvalidInput("failed writing checkpoint manifest");
}

namespace {

std::string shape_text(const std::vector<int>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
    return s + "]";
}

}  // namespace

HdrModel load_checkpoint(const std::filesystem::path& dir, CheckpointInfo* info) {
    std::ifstream manifest(dir / "manifest.txt");
    if (!manifest) throw InvalidInput("checkpoint manifest not found in " + dir.string());
    ModelSpec spec;
    long long step = 0;
    struct Entry {
        std::string name, file;
        std::vector<int> shape;
    };
    std::vector<Entry> entries;
    std::string line;
    while (std::getline(manifest, line)) {
        std::istringstream ls(line);
        std::string key;
        if (!(ls >> key)) continue;
        if (key == "architecture") ls >> spec.architecture;
        else if (key == "width") ls >> spec.width;
        else if (key == "seed") ls >> spec.seed;
        else if (key == "step") ls >> step;
        else if (key == "tensor") {
            Entry e;
            std::size_t rank = 0;
            ls >> e.name >> e.file >> rank;
            e.shape.resize(rank);
            for (auto& d : e.shape) ls >> d;
            if (!ls) throw InvalidInput("malformed tensor line in manifest: " + line);
            entries.push_back(std::move(e));
        }
    }
    auto net = std::make_shared<const Network>(spec);
    ParameterSet params = net->layout();
    std::vector<std::string> problems;
    if (entries.size() != params.count())
        problems.push_back("tensor count " + std::to_string(entries.size()) + " (expected " +
                           std::to_string(params.count()) + ")");
    for (std::size_t i = 0; i < std::min(entries.size(), params.count()); ++i)
        if (entries[i].name != params[i].name)
            problems.push_back("'" + entries[i].name + "' vs expected '" + params[i].name + "'");
        else if (entries[i].shape != params[i].shape)
            problems.push_back("'" + entries[i].name + "' shape " + shape_text(entries[i].shape) + " vs expected " +
                               shape_text(params[i].shape));
    if (!problems.empty()) {
        std::string msg = "checkpoint architecture mismatch:";
        for (const auto& p : problems) msg += " " + p + ";";
        throw InvalidInput(msg);
    }
    for (std::size_t i = 0; i < entries.size(); ++i) params[i].value = read_f32_blob(dir / entries[i].file, params[i].size());
    if (info) *info = {spec, step};
    return HdrModel(std::move(net), std::move(params));
}

}  // namespace hdrssl
