__version__ = "0.1.0"
__author__ = "whitneyext contributors"
__description__ = "Whitney-type extension operator and constant audits on finite metric measure spaces"
