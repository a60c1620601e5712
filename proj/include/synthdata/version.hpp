#pragma once

#define SYNTHDATA_VERSION "0.1.0"
