#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>

#include "grnet/feature_io.hpp"
#include "grnet/manifest.hpp"
#include "grnet/rng.hpp"

namespace grnet {

// Planted-patch benchmark generator. Each identity is a small signature
// patch planted at a random window of both its query and gallery maps, over
// a noisy background with clutter patches of signature strength. A patch is
// a per-channel amplitude pattern (the identity fingerprint, which survives
// max-pooling) times a per-pixel field, so identity can be read off any
// window that contains the patch, while the global per-channel max mixes
// signature, clutter and background.
//
// All stochastic variation between the two views of one identity flows from
// the noise knob: per-pixel jitter of sigma `noise` everywhere, plus a
// per-image offset of sigma `style_factor * noise` added to the designated
// trailing "style" channels of the whole map. With noise = 0 the query and
// gallery are identical inside the signature window. The style offset gives
// matched window pairs a stable squared-difference direction (energy
// concentrated on style channels), which is what makes local matching
// learnable after l2 normalization.
//
// Query-side perturbations emulate the hard protocols: occlusion overwrites
// a random sub-window with strong noise, cropping zeroes a border band, and
// the "view" change is a deterministic channel rotation and attenuation per
// side/back tag. Attributes are recorded truthfully in the manifest.
struct SyntheticSpec {
  int train_identities = 200;
  int val_identities = 16;
  int test_identities = 50;
  int distractors = 200;          // gallery-only items in the test split
  int queries_per_test_identity = 2;

  int channels = 16;
  int style_channels = 4;  // trailing channels carrying the style offset
  int height = 12;
  int width = 12;
  int signature_h = 4;
  int signature_w = 4;
  double signature_lo = 0.3;  // per-channel amplitude range of a patch
  double signature_hi = 2.5;
  double background = 1.0;  // background pixel ~ U[0, background]
  double noise = 0.05;      // additive N(0, noise) jitter everywhere
  double style_factor = 8.0;  // style offset sigma as a multiple of noise
  int clutter_patches = 2;
  int clutter_h = 3;
  int clutter_w = 3;

  double occlusion_rate = 0.0;
  double cropping_rate = 0.0;
  double view_rate = 0.0;
  double occlusion_fraction = 0.4;  // occluder side length as a map fraction
  double cropping_fraction = 0.35;  // border band width as a map fraction

  Dtype dtype = Dtype::kF32;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SyntheticResult {
  Manifest manifest;
  int files_written = 0;
  // Signature top-left corner per item id, for auditing and tests.
  std::map<std::string, std::pair<int, int>> signature_at;
};

// Attribute draw used for every query record; exposed so the attribute
// frequencies can be tested without generating any maps.
QueryAttributes sample_query_attributes(const SyntheticSpec& spec, Rng& rng);

// Resolved spec as JSON, echoed into the generated manifest header.
std::string synthetic_spec_to_json(const SyntheticSpec& spec);

// Generates feature files under out_dir/features plus out_dir/manifest.txt.
// Deterministic given the spec (including its seed); rerunning overwrites
// the same content.
SyntheticResult generate_synthetic(const SyntheticSpec& spec,
                                   const std::filesystem::path& out_dir,
                                   const std::string& config_echo = "");

}  // namespace grnet
