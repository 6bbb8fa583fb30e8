#pragma once

#include "stereonet/tensor.hpp"
#include "stereonet/autograd.hpp"
#include "stereonet/conv.hpp"
#include "stereonet/ops.hpp"
#include "stereonet/gradcheck.hpp"
#include "stereonet/layers.hpp"
#include "stereonet/features.hpp"
#include "stereonet/cost_volume.hpp"
#include "stereonet/refinement.hpp"
#include "stereonet/model.hpp"
#include "stereonet/loss.hpp"
#include "stereonet/optim.hpp"
#include "stereonet/train.hpp"
#include "stereonet/baseline.hpp"
#include "stereonet/eval.hpp"
#include "stereonet/experiment.hpp"
#include "stereonet/checkpoint.hpp"
#include "stereonet/config.hpp"
#include "stereonet/io/sample.hpp"
#include "stereonet/io/pfm.hpp"
#include "stereonet/io/image.hpp"
#include "stereonet/io/dataset.hpp"
#include "stereonet/io/synth.hpp"
