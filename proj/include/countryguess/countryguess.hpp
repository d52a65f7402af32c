#pragma once

// Everything in one include.

#include "codec.hpp"
#include "color.hpp"
#include "digest.hpp"
#include "engine.hpp"
#include "error.hpp"
#include "evalkit.hpp"
#include "evidence.hpp"
#include "freqlist.hpp"
#include "fusion.hpp"
#include "game.hpp"
#include "http_api.hpp"
#include "image.hpp"
#include "json_io.hpp"
#include "knowledge.hpp"
#include "optimize.hpp"
#include "plate.hpp"
#include "profiles.hpp"
#include "providers.hpp"
#include "solar.hpp"
#include "streetview.hpp"
#include "synthetic.hpp"
#include "textlang.hpp"
#include "utf8.hpp"
