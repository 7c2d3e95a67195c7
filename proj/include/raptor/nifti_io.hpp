#pragma once

#include <string>

#include "raptor/evaluation.hpp"
#include "raptor/volume.hpp"

namespace raptor {

// Single-file NIfTI-1 (.nii / .nii.gz) support. Scalar volumes are written
// as float32; labels as int32; displacement fields as a 5D float32 image
// (dim[5] = 3, vector intent) in voxel units. scl_slope/scl_inter are
// applied on read; byte-swapped files are handled.

Volume read_volume(const std::string& path);
void write_volume(const Volume& v, const std::string& path);

LabelMap read_label_map(const std::string& path);
void write_label_map(const LabelMap& m, const std::string& path);

DisplacementField read_displacement_field(const std::string& path);
void write_displacement_field(const DisplacementField& d, const std::string& path);

} // namespace raptor
