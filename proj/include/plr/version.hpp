#pragma once

#define PLR_VERSION "0.1.0"
