#pragma once

#include "ngdf/adam.hpp"
#include "ngdf/control_points.hpp"
#include "ngdf/field.hpp"
#include "ngdf/grasp_oracle.hpp"
#include "ngdf/kinematics.hpp"
#include "ngdf/levelset.hpp"
#include "ngdf/oracle_field.hpp"
#include "ngdf/parallel.hpp"
#include "ngdf/planner.hpp"
#include "ngdf/se3.hpp"
#include "ngdf/train.hpp"
#include "ngdf/report.hpp"
#include "ngdf/suite.hpp"
