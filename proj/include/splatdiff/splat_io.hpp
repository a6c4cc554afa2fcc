#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "splatdiff/types.hpp"

namespace splatdiff {

// --- Gaussian splat PLY (INRIA 3DGS layout) --------------------------------
//
// Required vertex properties: x y z f_dc_0..2 opacity scale_0..2 rot_0..3.
// f_rest_* are kept in RawSplatRecord::sh_rest in index order. Other
// properties (nx, ny, nz, ...) and other elements are skipped.

std::vector<RawSplatRecord> parse_splat_ply(std::span<const std::uint8_t> bytes);
std::vector<RawSplatRecord> read_splat_ply(const std::filesystem::path& path);

/// Binary little-endian float32 PLY. All records must carry the same number
/// of sh_rest coefficients.
std::vector<std::uint8_t> encode_splat_ply(std::span<const RawSplatRecord> records);
void write_splat_ply(std::span<const RawSplatRecord> records,
                     const std::filesystem::path& path);

// --- Cameras ---------------------------------------------------------------
//
// JSON: {"cameras":[{"id":..,"width":..,"height":..,"fx":..,"fy":..,
//        "cx":..,"cy":..,"q_wxyz":[w,x,y,z],"t":[x,y,z]}]}  (world -> camera)
// COLMAP text: cameras.txt + images.txt, PINHOLE / SIMPLE_PINHOLE only. One
// CameraRecord per image, id = IMAGE_ID.

std::vector<CameraRecord> parse_cameras_json(std::string_view text);
std::vector<CameraRecord> parse_colmap_text(std::string_view cameras_txt,
                                            std::string_view images_txt);

/// Accepts a .json file, or a directory holding cameras.txt and images.txt.
std::vector<CameraRecord> read_cameras(const std::filesystem::path& path);

std::string encode_cameras_json(std::span<const CameraRecord> cameras);
void write_cameras_json(std::span<const CameraRecord> cameras,
                        const std::filesystem::path& path);

/// Builds a world->camera rotation from a COLMAP-convention quaternion.
/// Rejects quaternions whose rotation would be non-orthonormal by more than
/// 1e-4 (|q| far from 1); otherwise normalizes.
Mat3 rotation_from_quaternion(double w, double x, double y, double z);

// --- Maps and tables -------------------------------------------------------

/// Grayscale PNG, value = round(v * (2^bits - 1)); bits is 8 or 16.
void write_change_map(const ScalarImage& map, const std::filesystem::path& path,
                      int bits = 16);
ScalarImage read_change_map(const std::filesystem::path& path);

/// 8-bit grayscale mask: 0 or 255.
void write_mask(const MaskImage& mask, const std::filesystem::path& path);
MaskImage read_mask(const std::filesystem::path& path);

/// Indexed (palette) PNG with indices {0: unchanged, 1: structural, 2: surface}.
void write_label_map(const LabelImage& labels, const std::filesystem::path& path);
LabelImage read_label_map(const std::filesystem::path& path);

void write_score_table(std::span<const ScoreRow> rows,
                       const std::filesystem::path& path);
std::string format_score_table(std::span<const ScoreRow> rows);

}  // namespace splatdiff
