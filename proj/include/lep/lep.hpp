#pragma once

#include "lep/types.hpp"
#include "lep/linalg.hpp"
#include "lep/model.hpp"
#include "lep/nhh.hpp"
#include "lep/moments.hpp"
#include "lep/correlations.hpp"
#include "lep/spectra.hpp"
#include "lep/fockspace.hpp"
#include "lep/sensitivity.hpp"
#include "lep/io.hpp"
#include "lep/cli.hpp"
