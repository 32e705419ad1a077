#pragma once

#include "engagedyn/numkit/linalg.hpp"
#include "engagedyn/numkit/lasso.hpp"
#include "engagedyn/numkit/nlls.hpp"
#include "engagedyn/numkit/segmented.hpp"
#include "engagedyn/numkit/spectral.hpp"
