__version__ = "1.0.0"

TOOL_NAME = "uris-mec"

VERSION_INFO = {
    "name": TOOL_NAME,
    "version": __version__,
    "description": "Энергоэффективная MEC-система с RIS на борту БПЛА",
}

def get_version_info():
    return VERSION_INFO.copy()
