#pragma once

#include <cstdint>
#include <string>

#include "copycat/manifest.hpp"

namespace copycat {

// Synthetic corpora: bitmap-font digits as the problem domain, bitmap-font
// letters and line-drawn shapes as the non-problem surrogate pool.
enum class GlyphDomain { kDigits, kLetters, kShapes };

GlyphDomain glyph_domain_from(const std::string& name);
int glyph_class_count(GlyphDomain domain);

// One sample of class `cls`: the base glyph with seeded size, pose, stroke
// intensity, blur, background level, and noise. Values in [0,1].
FloatImage render_glyph(GlyphDomain domain, int cls, InputShape shape, Rng& rng);

// Writes per_class PNGs per class. labeled=true yields a (PDD, OL) pool to
// be carved by split_problem; labeled=false drops the true labels and yields
// an (NPDD, NONE) surrogate pool. num_classes stamps the manifest (the
// problem's K for surrogate pools); -1 means the domain's own class count.
DatasetManifest generate_glyph_corpus(GlyphDomain domain, int per_class, InputShape shape,
                                      uint64_t seed, const std::string& out_dir, bool labeled,
                                      int num_classes = -1);

// Concatenates records; inputs must agree on split, label_source, and K.
DatasetManifest merge_manifests(const DatasetManifest& a, const DatasetManifest& b);

}  // namespace copycat
