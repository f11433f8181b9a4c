#pragma once

#include "bellfam/classical.hpp"
#include "bellfam/family.hpp"
#include "bellfam/generator.hpp"
#include "bellfam/inequality.hpp"
#include "bellfam/optimize.hpp"
#include "bellfam/quantum.hpp"
#include "bellfam/rational.hpp"
#include "bellfam/seesaw.hpp"
#include "bellfam/statevector.hpp"
#include "bellfam/util.hpp"
