#pragma once

// Umbrella header: the whole library in one include.

#include "carsnn/core/binary_io.hpp"
#include "carsnn/core/error.hpp"
#include "carsnn/core/parallel.hpp"
#include "carsnn/core/rng.hpp"
#include "carsnn/events/dat.hpp"
#include "carsnn/events/dataset.hpp"
#include "carsnn/events/event.hpp"
#include "carsnn/events/evtcsv.hpp"
#include "carsnn/events/synthetic.hpp"
#include "carsnn/loihi/cuba.hpp"
#include "carsnn/loihi/emulate.hpp"
#include "carsnn/loihi/equivalence.hpp"
#include "carsnn/loihi/mapping.hpp"
#include "carsnn/loihi/quantize.hpp"
#include "carsnn/loihi/serialize.hpp"
#include "carsnn/preprocess/frames.hpp"
#include "carsnn/preprocess/occurrence.hpp"
#include "carsnn/preprocess/window.hpp"
#include "carsnn/snn/kernels.hpp"
#include "carsnn/snn/layer.hpp"
#include "carsnn/snn/lif.hpp"
#include "carsnn/snn/network.hpp"
#include "carsnn/snn/serialize.hpp"
#include "carsnn/snn/simulate.hpp"
#include "carsnn/stbp/adam.hpp"
#include "carsnn/stbp/backward.hpp"
#include "carsnn/stbp/checkpoint.hpp"
#include "carsnn/stbp/presets.hpp"
#include "carsnn/stbp/train.hpp"
