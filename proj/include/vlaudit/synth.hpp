#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "vlaudit/types.hpp"

// Seeded fixtures with known ground truth. Sample i of a set draws from its
// own generator stream, so outputs are independent of thread count.
namespace vlaudit::synth {

struct SynthConfig {
    std::uint64_t seed = 0;
    std::size_t n = 300;      // per class
    std::size_t dim = 16;
    double delta = 0.0;       // S2 mean shift along the first axis
    double signal = 0.0;      // member top-logit sharpening s
    std::size_t vocab = 64;
    std::size_t length = 32;  // steps per trace
    std::optional<std::size_t> instruction_steps;  // default length / 4
    std::size_t samples_per_image = 1;
    std::size_t height = 32;
    std::size_t width = 32;
    std::size_t blur = 2;

    /// Throws ParameterError on out-of-range fields.
    void validate() const;
    std::size_t resolved_instruction_steps() const;
};

/// Sample ids shared by traces and images: "img00000" .. ; the first n are members.
std::string sample_id(std::size_t i);

/// S1 ~ N(0, I_d); S2 ~ N((delta, 0, ..., 0), I_d). Ids "s1_00000", "s2_00000", ...
std::pair<EmbeddingSpace, EmbeddingSpace> gen_shifted_embeddings(const SynthConfig& cfg);

/// 2n images' traces, members first. With samples_per_image > 1 ids become
/// "img00000#k"; the logits of one (image, step) are shared by all its samples.
std::vector<GenerationTrace> gen_traces(const SynthConfig& cfg);

struct ImageSets {
    std::vector<GrayImage> sharp;    // members
    std::vector<GrayImage> blurred;  // non-members
};

/// Integer white noise; the second set is box-blurred with radius `blur`
/// (edge-clamped, rounded). blur = 0 leaves both sets sharp.
ImageSets gen_images(const SynthConfig& cfg);

/// (2b+1)x(2b+1) edge-clamped box mean, rounded to integers.
GrayImage box_blur(const GrayImage& image, std::size_t radius);

}  // namespace vlaudit::synth
