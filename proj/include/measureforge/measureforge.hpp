#pragma once

#include "measureforge/analysis.hpp"
#include "measureforge/cgm.hpp"
#include "measureforge/core.hpp"
#include "measureforge/dictionary.hpp"
#include "measureforge/em.hpp"
#include "measureforge/experiment.hpp"
#include "measureforge/restricted.hpp"
#include "measureforge/serialize.hpp"
