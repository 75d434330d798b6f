from humanseek.backends.base import *
from humanseek.backends.filesystem_backend import *
from humanseek.backends.json_backend import *
from humanseek.backends.matplotlib_backend import *
from humanseek.backends.numpy_backend import *
from humanseek.backends.pandas_backend import *
from humanseek.backends.volatile_backend import *
from humanseek.backends.yaml_backend import *
