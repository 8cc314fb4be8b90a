#pragma once

#include <cstdint>
#include <filesystem>

#include "bedsal/dataio.hpp"
#include "bedsal/image.hpp"
#include "bedsal/slic.hpp"

namespace bedsal::synth {

/// Small segmented scene for enclosure tests.
struct Scene {
  RgbImage rgb;
  DepthImage depth;
  slic::Partition part;
  slic::SuperpixelStats stats;
};

/// Random box/step layout: a background split into two depth levels by a
/// vertical or horizontal step, plus 1-3 nearer boxes. Each depth region has
/// its own flat color, so SLIC boundaries follow the layout.
Scene box_scene(std::uint64_t seed, int side = 64, int k_target = 64);

/// Segments an explicit depth layout whose regions are colored by depth.
Scene scene_from_depth(const DepthImage& depth, int k_target);

/// Partition made of square blocks, each its own superpixel.
slic::Partition block_partition(int width, int height, int block);

/// Writes root/{rgb,depth,gt}/NNNN.png: bright near objects in front of a
/// textured far wall and a mid-depth floor. Depth is 16-bit, Kinect-like.
void write_fixture(const std::filesystem::path& root, int count = 5, std::uint64_t seed = 0,
                   int width = 400, int height = 300);

}  // namespace bedsal::synth
