#pragma once

#include "foilgen/aero.hpp"
#include "foilgen/checkpoint.hpp"
#include "foilgen/dataset.hpp"
#include "foilgen/error.hpp"
#include "foilgen/ga.hpp"
#include "foilgen/geometry.hpp"
#include "foilgen/latent.hpp"
#include "foilgen/nn.hpp"
#include "foilgen/svg.hpp"
#include "foilgen/text.hpp"
#include "foilgen/vaegan.hpp"
