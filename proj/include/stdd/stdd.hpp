#pragma once

// Umbrella header.

#include "stdd/alignment.hpp"
#include "stdd/askg/client.hpp"
#include "stdd/askg/graph.hpp"
#include "stdd/askg/prompts.hpp"
#include "stdd/bench.hpp"
#include "stdd/config.hpp"
#include "stdd/encoder.hpp"
#include "stdd/gradcheck.hpp"
#include "stdd/selftest.hpp"
#include "stdd/serialize.hpp"
#include "stdd/train.hpp"
#include "stdd/video.hpp"
#include "stdd/zeroshot.hpp"
