#ifndef VSTAIN_SYNTHDATA_HPP
#define VSTAIN_SYNTHDATA_HPP

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "vstain/tensor.hpp"

namespace vstain::synth {

// HER2-style expression level: 0, 1+, 2+, 3+.
enum class Her2Label : int { l0 = 0, l1 = 1, l2 = 2, l3 = 3 };

std::string label_name(Her2Label l);
// Parses "0", "1+", "2+", "3+"; throws on anything else.
Her2Label parse_label(const std::string& s);

struct SlidePair {
    Tensor he;   // [H,W,3] in [-1,1]
    Tensor ihc;  // same shape
    Her2Label label = Her2Label::l0;
    std::string id;
};

struct GeneratorSpec {
    int image_size = 64;
    int nuclei_min = 6;
    int nuclei_max = 18;
    double background_fraction = 0.5;  // target tissue-free area, in [0.2, 0.8]
    double misalignment_px = 0.0;      // smooth warp amplitude applied to the IHC
    uint64_t seed = 0;

    void validate() const;
};

// Procedural pixel-aligned H&E/IHC pair. The H&E side carries near-white
// background, purple elliptical nuclei and faint fibrous texture; the IHC
// side recolors the same geometry with a blue-gray counterstain plus brown
// membrane rings and a diffuse cytoplasmic wash whose intensity and
// completeness grow with the label.
// Nuclei count and hematoxylin darkness also grow with the label so the
// expression level is inferable from the H&E image alone.
// Deterministic: the pair is a pure function of the spec (including seed).
SlidePair generate_pair(const GeneratorSpec& spec);

// Convenience: n pairs with seeds spec.seed, spec.seed+1, ...
std::vector<SlidePair> generate_corpus(GeneratorSpec spec, int n);

// Mean positive red-over-blue excess in the 8-bit domain: the brown-stain
// intensity statistic used by the monotonicity checks.
double brown_score(const Tensor& ihc);

// Pairs images with the same basename across the two directories; label is
// taken from a trailing "_<level>" filename token when present (e.g.
// "00052_test_3+.png" -> 3+), otherwise 0. Unmatched or unreadable files are
// skipped with a warning to stderr. Throws when no basenames match.
std::vector<SlidePair> load_paired_dir(const std::string& he_dir, const std::string& ihc_dir,
                                       int image_size);

// Label parsed from a filename like "00052_test_3+.png"; returns false when
// no trailing level token is present.
bool label_from_filename(const std::string& filename, Her2Label& out);

}  // namespace vstain::synth

#endif
