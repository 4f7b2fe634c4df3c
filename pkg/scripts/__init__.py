# This file allows the scripts directory to be treated as a package.
